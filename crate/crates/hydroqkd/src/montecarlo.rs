//! Pulse-level stochastic simulation of decoy-state BB84 through the
//! channel model, producing per-intensity tallies with a ground-truth
//! photon-number breakdown (the oracle the decoy analysis is tested
//! against).
//!
//! Draw order per gate, consumed from one ChaCha8 stream seeded by the
//! config (fixed seed ⇒ bitwise-identical tallies):
//!
//! 1. intensity class, 2. Alice basis, 3. Alice bit, 4. Bob basis,
//! 5. Poisson photon count for the class mean, 6. one survival draw per
//! photon, 7. dark-count draw (only when p_dc > 0), 8. on a sifted
//! detection: the outcome draw (a misalignment flip when photons
//! survived, otherwise a uniform bit), 9. after-pulse draw (only when
//! p_ap > 0 and the gate detected). The environment compensator steps
//! once per gate before any outcome is decided.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::bitops::BitString;
use crate::channel::{
    emis_from_theta, Compensator, ChannelError, DetectorModel, EnvironmentProfile, FiberLink,
};
use crate::protocol::{draw_bit, draw_prob, IntensityClass};

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("intensities must satisfy μ ≥ ν1 ≥ ν2 ≥ 0, got μ={mu}, ν1={nu1}, ν2={nu2}")]
    BadIntensities { mu: f64, nu1: f64, nu2: f64 },
    #[error("intensity probabilities must lie in [0, 1] and sum to 1 within 1e-9, got sum {0}")]
    BadProbabilities(f64),
    #[error("basis probability {0} outside [0, 1]")]
    BadBasisProbability(f64),
    #[error("pulse rate must be > 0 pulses/s, got {0}")]
    BadPulseRate(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Source-side configuration: intensity set, class probabilities, basis
/// bias, pulse budget and rate, and the session seed.
///
/// Decoy estimation requires the strict ordering μ > ν1 > ν2; the
/// simulator itself accepts equalities (down to all-zero intensities,
/// which is a useful dark-count-only configuration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub pulse_count: u64,
    pub mu: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub p_mu: f64,
    pub p_nu1: f64,
    pub p_nu2: f64,
    pub basis_probability_x: f64,
    pub pulse_rate: f64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), McError> {
        let (mu, nu1, nu2) = (self.mu, self.nu1, self.nu2);
        if !(nu2 >= 0.0 && nu1 >= nu2 && mu >= nu1) {
            return Err(McError::BadIntensities { mu, nu1, nu2 });
        }
        let sum = self.p_mu + self.p_nu1 + self.p_nu2;
        let in_range = [self.p_mu, self.p_nu1, self.p_nu2]
            .iter()
            .all(|p| (0.0..=1.0).contains(p));
        if !in_range || (sum - 1.0).abs() > 1e-9 {
            return Err(McError::BadProbabilities(sum));
        }
        if !(0.0..=1.0).contains(&self.basis_probability_x) {
            return Err(McError::BadBasisProbability(self.basis_probability_x));
        }
        if !(self.pulse_rate > 0.0) {
            return Err(McError::BadPulseRate(self.pulse_rate));
        }
        Ok(())
    }

    pub fn intensity(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::Signal => self.mu,
            IntensityClass::Decoy => self.nu1,
            IntensityClass::Vacuum => self.nu2,
        }
    }

    pub fn probability(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::Signal => self.p_mu,
            IntensityClass::Decoy => self.p_nu1,
            IntensityClass::Vacuum => self.p_nu2,
        }
    }

    /// Probability that Alice's and Bob's independently drawn bases match.
    pub fn basis_match_probability(&self) -> f64 {
        let q = self.basis_probability_x;
        q * q + (1.0 - q) * (1.0 - q)
    }
}

/// Ground-truth photon-number bucket recorded by the simulation oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhotonBucket {
    Zero,
    One,
    Multi,
}

impl PhotonBucket {
    pub const ALL: [PhotonBucket; 3] = [PhotonBucket::Zero, PhotonBucket::One, PhotonBucket::Multi];

    pub fn from_count(n: u64) -> Self {
        match n {
            0 => PhotonBucket::Zero,
            1 => PhotonBucket::One,
            _ => PhotonBucket::Multi,
        }
    }

    pub fn index(&self) -> usize {
        match self {
            PhotonBucket::Zero => 0,
            PhotonBucket::One => 1,
            PhotonBucket::Multi => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhotonBucket::Zero => "0",
            PhotonBucket::One => "1",
            PhotonBucket::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassTally {
    pub sent: u64,
    pub detected_sifted: u64,
    pub errors_sifted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleCell {
    pub detected_sifted: u64,
    pub errors_sifted: u64,
}

/// Per-intensity send/detect/error counts plus the per-photon-number
/// oracle breakdown and the simulated elapsed time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TallyTable {
    classes: [ClassTally; 3],
    oracle: [[OracleCell; 3]; 3],
    pub elapsed_time: f64,
}

impl TallyTable {
    pub fn class(&self, class: IntensityClass) -> &ClassTally {
        &self.classes[class.index()]
    }

    pub fn oracle_cell(&self, class: IntensityClass, bucket: PhotonBucket) -> &OracleCell {
        &self.oracle[class.index()][bucket.index()]
    }

    pub fn sifted_total(&self) -> u64 {
        self.classes.iter().map(|c| c.detected_sifted).sum()
    }

    pub fn errors_total(&self) -> u64 {
        self.classes.iter().map(|c| c.errors_sifted).sum()
    }

    /// Observed sifted QBER, 0 when nothing was detected.
    pub fn qber(&self) -> f64 {
        let n = self.sifted_total();
        if n == 0 {
            0.0
        } else {
            self.errors_total() as f64 / n as f64
        }
    }

    /// (detections, errors) per class as reals, in Signal/Decoy/Vacuum order.
    pub fn counts_by_class(&self) -> ([f64; 3], [f64; 3]) {
        let mut n = [0.0; 3];
        let mut m = [0.0; 3];
        for (i, c) in self.classes.iter().enumerate() {
            n[i] = c.detected_sifted as f64;
            m[i] = c.errors_sifted as f64;
        }
        (n, m)
    }

    /// Checks errors ≤ detected ≤ sent per class and that oracle buckets
    /// sum to the class totals.
    pub fn check_invariants(&self) -> bool {
        IntensityClass::ALL.iter().all(|&class| {
            let c = self.class(class);
            let (mut det, mut err) = (0u64, 0u64);
            for bucket in PhotonBucket::ALL {
                let cell = self.oracle_cell(class, bucket);
                det += cell.detected_sifted;
                err += cell.errors_sifted;
            }
            c.errors_sifted <= c.detected_sifted
                && c.detected_sifted <= c.sent
                && det == c.detected_sifted
                && err == c.errors_sifted
        })
    }

    /// CSV block: one `all` row per intensity class (with `sent`), then
    /// the oracle rows per photon bucket (with `sent` left empty).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,photon_bucket,sent,detected_sifted,errors_sifted\n");
        for class in IntensityClass::ALL {
            let c = self.class(class);
            out.push_str(&format!(
                "{},all,{},{},{}\n",
                class.name(),
                c.sent,
                c.detected_sifted,
                c.errors_sifted
            ));
            for bucket in PhotonBucket::ALL {
                let cell = self.oracle_cell(class, bucket);
                out.push_str(&format!(
                    "{},{},,{},{}\n",
                    class.name(),
                    bucket.name(),
                    cell.detected_sifted,
                    cell.errors_sifted
                ));
            }
        }
        out
    }
}

/// Runs the simulation and returns the tallies only.
pub fn run(
    config: &SimulationConfig,
    link: &FiberLink,
    det: &DetectorModel,
    env: &EnvironmentProfile,
    stabilization_gain: f64,
) -> Result<TallyTable, McError> {
    Ok(run_core(config, link, det, env, stabilization_gain, false)?.0)
}

/// Runs the simulation and also collects the sifted bit strings
/// (Alice's, Bob's) for the post-processing pipeline.
pub fn run_session(
    config: &SimulationConfig,
    link: &FiberLink,
    det: &DetectorModel,
    env: &EnvironmentProfile,
    stabilization_gain: f64,
) -> Result<(TallyTable, BitString, BitString), McError> {
    let (tally, keys) = run_core(config, link, det, env, stabilization_gain, true)?;
    let (alice, bob) = keys.expect("keys collected");
    Ok((tally, alice, bob))
}

fn run_core(
    config: &SimulationConfig,
    link: &FiberLink,
    det: &DetectorModel,
    env: &EnvironmentProfile,
    stabilization_gain: f64,
    collect_keys: bool,
) -> Result<(TallyTable, Option<(BitString, BitString)>), McError> {
    config.validate()?;
    let mut comp = Compensator::new(stabilization_gain)?;
    let eta = link.transmittance() * det.efficiency;
    let dark_prob = 2.0 * det.dark_count_prob;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Poisson samplers per class; a zero mean never emits photons.
    let samplers: Vec<Option<Poisson<f64>>> = IntensityClass::ALL
        .iter()
        .map(|&c| {
            let mean = config.intensity(c);
            if mean > 0.0 {
                Some(Poisson::new(mean).expect("validated mean"))
            } else {
                None
            }
        })
        .collect();

    // Trig shortcut for a frozen environment (no live sources, no feedback).
    let frozen_env = stabilization_gain == 0.0
        && env.sources.iter().all(|s| s.amplitude_mm * s.coupling_rad_per_mm == 0.0);
    let frozen_emis = emis_from_theta(env.theta_at(0.0));

    let mut tally = TallyTable::default();
    let mut alice_key = BitString::new();
    let mut bob_key = BitString::new();
    let mut ap_pending = false;

    for i in 0..config.pulse_count {
        let class = draw_class(&mut rng, config);
        tally.classes[class.index()].sent += 1;

        let alice_x = draw_prob(&mut rng) < config.basis_probability_x;
        let alice_bit = draw_bit(&mut rng);
        let bob_x = draw_prob(&mut rng) < config.basis_probability_x;

        let photons = match &samplers[class.index()] {
            Some(p) => p.sample(&mut rng) as u64,
            None => 0,
        };
        let mut survivors = 0u64;
        for _ in 0..photons {
            if draw_prob(&mut rng) < eta {
                survivors += 1;
            }
        }
        let dark = dark_prob > 0.0 && draw_prob(&mut rng) < dark_prob;
        let detected = survivors > 0 || dark || ap_pending;

        let e_mis = if frozen_env {
            frozen_emis
        } else {
            let t = i as f64 / config.pulse_rate;
            emis_from_theta(comp.step(env.theta_at(t)))
        };

        if detected && alice_x == bob_x {
            let bob_bit = if survivors > 0 {
                let flip = draw_prob(&mut rng) < e_mis;
                alice_bit ^ (flip as u8)
            } else {
                // Dark-count or after-pulse click: outcome is uniform.
                draw_bit(&mut rng)
            };
            let bucket = PhotonBucket::from_count(photons);
            tally.classes[class.index()].detected_sifted += 1;
            tally.oracle[class.index()][bucket.index()].detected_sifted += 1;
            if bob_bit != alice_bit {
                tally.classes[class.index()].errors_sifted += 1;
                tally.oracle[class.index()][bucket.index()].errors_sifted += 1;
            }
            if collect_keys {
                alice_key.push(alice_bit);
                bob_key.push(bob_bit);
            }
        }

        ap_pending =
            detected && det.after_pulse_prob > 0.0 && draw_prob(&mut rng) < det.after_pulse_prob;
    }

    tally.elapsed_time = config.pulse_count as f64 / config.pulse_rate;
    let keys = collect_keys.then_some((alice_key, bob_key));
    Ok((tally, keys))
}

fn draw_class(rng: &mut impl RngCore, config: &SimulationConfig) -> IntensityClass {
    let u: f64 = draw_prob(rng);
    if u < config.p_mu {
        IntensityClass::Signal
    } else if u < config.p_mu + config.p_nu1 {
        IntensityClass::Decoy
    } else {
        IntensityClass::Vacuum
    }
}

/// A sampler wrapper so callers outside the module can draw photon
/// numbers consistently with the simulation (used by examples).
pub fn sample_photon_number(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{detection_rate, qber_model};

    fn defaults() -> SimulationConfig {
        SimulationConfig {
            pulse_count: 200_000,
            mu: 0.5,
            nu1: 0.1,
            nu2: 0.002,
            p_mu: 0.45,
            p_nu1: 0.30,
            p_nu2: 0.25,
            basis_probability_x: 0.5,
            pulse_rate: 1e6,
            seed: 11,
        }
    }

    fn link10() -> FiberLink {
        FiberLink::new(0.2, 10.0).unwrap()
    }

    fn detector() -> DetectorModel {
        DetectorModel::new(1e-6, 0.0, 0.25).unwrap()
    }

    fn quiet_env() -> EnvironmentProfile {
        EnvironmentProfile::frozen(0.1).unwrap()
    }

    #[test]
    fn empty_run_is_all_zero() {
        let mut config = defaults();
        config.pulse_count = 0;
        let tally = run(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        assert_eq!(tally, TallyTable::default());
        assert_eq!(tally.elapsed_time, 0.0);
    }

    #[test]
    fn no_photons_no_dark_counts_means_no_detections() {
        let mut config = defaults();
        config.mu = 0.0;
        config.nu1 = 0.0;
        config.nu2 = 0.0;
        config.pulse_count = 20_000;
        let det = DetectorModel::new(0.0, 0.0, 0.25).unwrap();
        let tally = run(&config, &link10(), &det, &quiet_env(), 0.0).unwrap();
        assert_eq!(tally.sifted_total(), 0);
        let sent: u64 = IntensityClass::ALL.iter().map(|&c| tally.class(c).sent).sum();
        assert_eq!(sent, 20_000);
    }

    #[test]
    fn identical_inputs_give_identical_tallies_and_keys() {
        let config = defaults();
        let a = run_session(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        let b = run_session(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        assert_eq!(a, b);
        let plain = run(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        assert_eq!(plain, a.0);
    }

    #[test]
    fn different_seeds_differ() {
        let mut config = defaults();
        let a = run(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        config.seed += 1;
        let b = run(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn oracle_buckets_sum_to_class_totals() {
        let tally = run(&defaults(), &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        assert!(tally.check_invariants());
        assert!(tally.sifted_total() > 0);
    }

    #[test]
    fn true_vacuum_class_detections_live_in_bucket_zero() {
        let mut config = defaults();
        config.nu2 = 0.0;
        config.pulse_count = 400_000;
        let det = DetectorModel::new(1e-4, 0.0, 0.25).unwrap();
        let tally = run(&config, &link10(), &det, &quiet_env(), 0.0).unwrap();
        let vac = tally.class(IntensityClass::Vacuum);
        assert!(vac.detected_sifted > 0, "dark counts should fire");
        assert_eq!(
            tally.oracle_cell(IntensityClass::Vacuum, PhotonBucket::Zero).detected_sifted,
            vac.detected_sifted
        );
        assert_eq!(tally.oracle_cell(IntensityClass::Vacuum, PhotonBucket::One).detected_sifted, 0);
        assert_eq!(
            tally.oracle_cell(IntensityClass::Vacuum, PhotonBucket::Multi).detected_sifted,
            0
        );
    }

    #[test]
    fn signal_detections_nonincreasing_with_distance() {
        let seeds = [1u64, 2, 3, 4, 5];
        let mut means = Vec::new();
        for km in [1.0, 25.0, 50.0, 100.0] {
            let link = FiberLink::new(0.2, km).unwrap();
            let mut total = 0u64;
            for &seed in &seeds {
                let mut config = defaults();
                config.seed = seed;
                let tally = run(&config, &link, &detector(), &quiet_env(), 0.0).unwrap();
                total += tally.class(IntensityClass::Signal).detected_sifted;
            }
            means.push(total as f64 / seeds.len() as f64);
        }
        for pair in means.windows(2) {
            assert!(pair[1] <= pair[0], "detections grew with distance: {means:?}");
        }
    }

    #[test]
    fn after_pulses_chain_detections() {
        let mut config = defaults();
        config.mu = 0.0;
        config.nu1 = 0.0;
        config.nu2 = 0.0;
        config.pulse_count = 4_000;
        let sifted = |p_ap: f64| {
            let det = DetectorModel::new(0.25, p_ap, 0.25).unwrap();
            run(&config, &link10(), &det, &quiet_env(), 0.0).unwrap().sifted_total()
        };
        let without = sifted(0.0);
        let with = sifted(1.0);
        // dark-only: ≈ N/4 sifted; with p_ap=1 a detection chain locks in: ≈ N/2
        assert!(without < 1_200, "baseline unexpectedly high: {without}");
        assert!(with > 1_700, "after-pulse chain missing: {with}");
    }

    #[test]
    fn tallies_track_analytic_model_at_modest_scale() {
        let config = defaults();
        let link = link10();
        let det = detector();
        let env = quiet_env();
        let tally = run(&config, &link, &det, &env, 0.0).unwrap();
        let eta = link.transmittance() * det.efficiency;
        let e_mis = emis_from_theta(env.theta_at(0.0));
        let p_match = config.basis_match_probability();
        for class in IntensityClass::ALL {
            let c = tally.class(class);
            let k = config.intensity(class);
            let p_det = p_match * detection_rate(k, eta, &det);
            let expect = c.sent as f64 * p_det;
            let sigma = (c.sent as f64 * p_det * (1.0 - p_det)).sqrt();
            assert!(
                (c.detected_sifted as f64 - expect).abs() <= 5.0 * sigma.max(1.0),
                "{}: detected {} vs expected {expect:.1} (σ {sigma:.1})",
                class.name(),
                c.detected_sifted
            );
            let q_model = qber_model(k, eta, &det, e_mis).unwrap();
            let n = c.detected_sifted as f64;
            let sigma_err = (n * q_model * (1.0 - q_model)).sqrt();
            assert!(
                (c.errors_sifted as f64 - n * q_model).abs() <= 5.0 * sigma_err.max(1.0),
                "{}: errors {} vs expected {:.1}",
                class.name(),
                c.errors_sifted,
                n * q_model
            );
        }
    }

    #[test]
    fn csv_block_has_class_and_oracle_rows() {
        let tally = run(&defaults(), &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        let csv = tally.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3 * 4);
        assert_eq!(lines[0], "class,photon_bucket,sent,detected_sifted,errors_sifted");
        assert!(lines[1].starts_with("signal,all,"));
        assert!(lines[2].starts_with("signal,0,,"));
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut c = defaults();
        c.nu1 = 0.6; // ν1 > μ
        assert!(matches!(c.validate(), Err(McError::BadIntensities { .. })));
        let mut c = defaults();
        c.p_mu = 0.9; // probabilities no longer sum to 1
        assert!(matches!(c.validate(), Err(McError::BadProbabilities(_))));
        let mut c = defaults();
        c.basis_probability_x = 1.2;
        assert!(matches!(c.validate(), Err(McError::BadBasisProbability(_))));
        let mut c = defaults();
        c.pulse_rate = 0.0;
        assert!(matches!(c.validate(), Err(McError::BadPulseRate(_))));
    }

    #[test]
    fn elapsed_time_is_pulse_count_over_rate() {
        let mut config = defaults();
        config.pulse_count = 5_000;
        config.pulse_rate = 2_500.0;
        let tally = run(&config, &link10(), &detector(), &quiet_env(), 0.0).unwrap();
        assert_eq!(tally.elapsed_time, 2.0);
    }
}
