//! Decoy-state parameter estimation and the finite-key secure key
//! length.
//!
//! Two estimation modes share one data type: `oracle_estimate` reads the
//! simulation's ground-truth photon-number buckets, `decoy_estimate`
//! derives lower bounds s_x0, s_x1 and an upper bound on the
//! single-photon phase-error rate φ_x from per-intensity counts alone
//! (two-decoy method with Hoeffding concentration scaled by ε_sec/6).
//! The secure length is
//!
//! ```text
//! ℓ = max(0, ⌊ s_x0 + s_x1 − s_x1·h(φ_x) − leak_EC
//!              − 6·log2(21/ε_sec) − log2(2/ε_cor) ⌋)
//! ```
//!
//! and the secret key rate is ℓ over the elapsed collection time. The
//! sweep helpers evaluate the analytic channel model over distance or
//! misalignment grids and emit CSV curve tables.

use thiserror::Error;

use crate::bitops::binary_entropy;
use crate::channel::{detection_rate, emis_from_theta, error_model, DetectorModel, FiberLink};
use crate::montecarlo::{PhotonBucket, SimulationConfig, TallyTable};
use crate::postproc::leak_accounting;
use crate::protocol::IntensityClass;

#[derive(Debug, Error, PartialEq)]
pub enum FkError {
    #[error("security epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("error-correction efficiency must be ≥ 1, got {0}")]
    BadEcEfficiency(f64),
    #[error("decoy estimation needs μ > ν1 > ν2, got μ={mu}, ν1={nu1}, ν2={nu2}")]
    DegenerateIntensities { mu: f64, nu1: f64, nu2: f64 },
    #[error("elapsed time must be > 0 s, got {0}")]
    ZeroElapsed(f64),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("misalignment angle {0} rad outside [0, π/2]")]
    BadTheta(f64),
    #[error("sifted block target must be > 0, got {0}")]
    BadBlockTarget(f64),
}

/// Composable-security failure budgets for the key-length formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    pub epsilon_sec: f64,
    pub epsilon_cor: f64,
}

impl SecurityParams {
    pub fn new(epsilon_sec: f64, epsilon_cor: f64) -> Result<Self, FkError> {
        for eps in [epsilon_sec, epsilon_cor] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(FkError::BadEpsilon(eps));
            }
        }
        Ok(SecurityParams { epsilon_sec, epsilon_cor })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    Oracle,
    Bounded,
}

/// Vacuum- and single-photon contributions to the sifted key, either as
/// simulation ground truth or as finite-sample decoy bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyEstimate {
    pub s_x0: f64,
    pub s_x1: f64,
    pub phi_x: f64,
    pub mode: EstimateMode,
}

/// Ground truth from the simulation oracle: vacuum-bucket and
/// single-photon-bucket sifted detections, and the observed
/// single-photon error rate (0 when no single-photon detections exist).
pub fn oracle_estimate(tally: &TallyTable) -> DecoyEstimate {
    let mut s0 = 0u64;
    let mut s1 = 0u64;
    let mut e1 = 0u64;
    for class in IntensityClass::ALL {
        s0 += tally.oracle_cell(class, PhotonBucket::Zero).detected_sifted;
        let one = tally.oracle_cell(class, PhotonBucket::One);
        s1 += one.detected_sifted;
        e1 += one.errors_sifted;
    }
    let phi = if s1 == 0 { 0.0 } else { e1 as f64 / s1 as f64 };
    DecoyEstimate { s_x0: s0 as f64, s_x1: s1 as f64, phi_x: phi, mode: EstimateMode::Oracle }
}

/// Finite-sample decoy bounds from a simulated tally.
pub fn decoy_estimate(
    tally: &TallyTable,
    config: &SimulationConfig,
    params: &SecurityParams,
) -> Result<DecoyEstimate, FkError> {
    let (nk, mk) = tally.counts_by_class();
    decoy_bounds(nk, mk, config, params)
}

/// Two-decoy bounds over real-valued per-class counts (Signal, Decoy,
/// Vacuum order). Zero total detections give the vacuous bound
/// (0, 0, 0.5). Requires the strict intensity ordering μ > ν1 > ν2.
pub fn decoy_bounds(
    nk: [f64; 3],
    mk: [f64; 3],
    config: &SimulationConfig,
    params: &SecurityParams,
) -> Result<DecoyEstimate, FkError> {
    let (mu, nu1, nu2) = (config.mu, config.nu1, config.nu2);
    if !(mu > nu1 && nu1 > nu2) {
        return Err(FkError::DegenerateIntensities { mu, nu1, nu2 });
    }
    let ntot: f64 = nk.iter().sum();
    let mtot: f64 = mk.iter().sum();
    if ntot <= 0.0 {
        return Ok(DecoyEstimate {
            s_x0: 0.0,
            s_x1: 0.0,
            phi_x: 0.5,
            mode: EstimateMode::Bounded,
        });
    }

    let (p_mu, p_nu1, p_nu2) = (config.p_mu, config.p_nu1, config.p_nu2);
    let tau0 = p_mu * (-mu).exp() + p_nu1 * (-nu1).exp() + p_nu2 * (-nu2).exp();
    let tau1 = p_mu * mu * (-mu).exp() + p_nu1 * nu1 * (-nu1).exp() + p_nu2 * nu2 * (-nu2).exp();

    let eps1 = params.epsilon_sec / 6.0;
    let dev_n = (ntot / 2.0 * (1.0 / eps1).ln()).sqrt();
    let dev_m = if mtot > 0.0 { (mtot / 2.0 * (1.0 / eps1).ln()).sqrt() } else { 0.0 };
    let upper = |n: f64, k: f64, p: f64, dev: f64| k.exp() / p * (n + dev);
    let lower = |n: f64, k: f64, p: f64, dev: f64| k.exp() / p * (n - dev).max(0.0);

    let nmu_p = upper(nk[0], mu, p_mu, dev_n);
    let nnu1_m = lower(nk[1], nu1, p_nu1, dev_n);
    let nnu1_p = upper(nk[1], nu1, p_nu1, dev_n);
    let nnu2_m = lower(nk[2], nu2, p_nu2, dev_n);
    let nnu2_p = upper(nk[2], nu2, p_nu2, dev_n);
    let mnu1_p = upper(mk[1], nu1, p_nu1, dev_m);
    let mnu2_m = lower(mk[2], nu2, p_nu2, dev_m);

    let s0 = (tau0 * (nu1 * nnu2_m - nu2 * nnu1_p) / (nu1 - nu2)).max(0.0);
    let s1 = (tau1 * mu
        * (nnu1_m - nnu2_p - (nu1 * nu1 - nu2 * nu2) / (mu * mu) * (nmu_p - s0 / tau0))
        / (mu * (nu1 - nu2) - nu1 * nu1 + nu2 * nu2))
        .max(0.0);
    let v1 = (tau1 * (mnu1_p - mnu2_m) / (nu1 - nu2)).max(0.0);
    let phi = if s1 > 0.0 { (v1 / s1).min(0.5) } else { 0.5 };

    Ok(DecoyEstimate { s_x0: s0, s_x1: s1, phi_x: phi, mode: EstimateMode::Bounded })
}

/// Secure key length in bits.
///
/// Preconditions: estimate fields finite with counts ≥ 0, params
/// epsilons in (0, 1), leak_ec ≥ 0. φ_x is clamped into [0, 0.5].
pub fn key_length(est: &DecoyEstimate, leak_ec: f64, params: &SecurityParams) -> u64 {
    let phi = est.phi_x.clamp(0.0, 0.5);
    let h_phi = binary_entropy(phi).expect("phi in domain");
    let raw = est.s_x0 + est.s_x1 - est.s_x1 * h_phi
        - leak_ec
        - 6.0 * (21.0 / params.epsilon_sec).log2()
        - (2.0 / params.epsilon_cor).log2();
    if raw <= 0.0 {
        0
    } else {
        raw.floor() as u64
    }
}

/// Secret key rate in bits per second.
pub fn secret_key_rate(key_length_bits: u64, elapsed_time: f64) -> Result<f64, FkError> {
    if !(elapsed_time > 0.0) {
        return Err(FkError::ZeroElapsed(elapsed_time));
    }
    Ok(key_length_bits as f64 / elapsed_time)
}

/// How a sweep sizes the finite-key analysis block at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Analyze the whole run (pulse count from the config) as one block.
    FixedPulses,
    /// Keep the collection time fixed and analyze complete sifted blocks
    /// of `target` bits; grid points whose yield cannot fill one block
    /// produce ℓ = 0.
    FixedTimeBlock { target: f64 },
    /// Fix the sifted block at `target` bits and let the collection time
    /// float (pulse count derived from the sifted yield per pulse).
    TargetSiftedBlock { target: f64 },
}

/// Everything the analytic sweep pipeline needs besides the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineInputs {
    pub config: SimulationConfig,
    pub detector: DetectorModel,
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
    pub e_mis: f64,
    pub params: SecurityParams,
    pub ec_efficiency: f64,
}

/// One curve-table row; `x` is the swept quantity (km or radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub loss_db: f64,
    pub transmittance: f64,
    pub qber: f64,
    pub key_length_bits: u64,
    pub skr_bps: f64,
}

/// Expected per-class sifted (detections, errors) for `n_pulses` pulses
/// through the analytic channel model. Errors are capped at half the
/// detections (a QBER can never exceed 1/2).
pub fn expected_tallies(
    config: &SimulationConfig,
    det: &DetectorModel,
    eta_ch: f64,
    e_mis: f64,
    n_pulses: f64,
) -> ([f64; 3], [f64; 3]) {
    let eta = eta_ch * det.efficiency;
    let p_sift = config.basis_match_probability();
    let mut nk = [0.0; 3];
    let mut mk = [0.0; 3];
    for (i, class) in IntensityClass::ALL.iter().enumerate() {
        let k = config.intensity(*class);
        let p = config.probability(*class);
        let d = detection_rate(k, eta, det);
        let e = match error_model(k, eta, det, e_mis) {
            Ok(e) => e.min(0.5 * d),
            Err(_) => 0.0, // degenerate only when d = 0 and the error term is dark-free
        };
        nk[i] = n_pulses * p * p_sift * d;
        mk[i] = n_pulses * p * p_sift * e;
    }
    (nk, mk)
}

/// Evaluates one grid point of the analytic pipeline.
pub fn evaluate_point(
    inputs: &PipelineInputs,
    length_km: f64,
    e_mis: f64,
    mode: SweepMode,
) -> Result<CurveRow, FkError> {
    let link = FiberLink::new(inputs.attenuation_db_per_km, length_km)
        .expect("validated attenuation and length");
    let eta_ch = link.transmittance();
    let config = &inputs.config;
    let det = &inputs.detector;

    let sift_rate_per_pulse = {
        let eta = eta_ch * det.efficiency;
        let p_sift = config.basis_match_probability();
        IntensityClass::ALL
            .iter()
            .map(|&c| config.probability(c) * detection_rate(config.intensity(c), eta, det))
            .sum::<f64>()
            * p_sift
    };
    let n_pulses = match mode {
        SweepMode::FixedPulses | SweepMode::FixedTimeBlock { .. } => config.pulse_count as f64,
        SweepMode::TargetSiftedBlock { target } => {
            if !(target > 0.0) {
                return Err(FkError::BadBlockTarget(target));
            }
            if sift_rate_per_pulse > 0.0 {
                target / sift_rate_per_pulse
            } else {
                0.0
            }
        }
    };

    let (nk, mk) = expected_tallies(config, det, eta_ch, e_mis, n_pulses);
    let ntot: f64 = nk.iter().sum();
    let mtot: f64 = mk.iter().sum();
    let qber = if ntot > 0.0 { mtot / ntot } else { 0.0 };

    let key_length_bits = match mode {
        SweepMode::FixedPulses | SweepMode::TargetSiftedBlock { .. } => {
            let est = decoy_bounds(nk, mk, config, &inputs.params)?;
            let leak = leak_accounting(ntot, qber, inputs.ec_efficiency);
            key_length(&est, leak, &inputs.params)
        }
        SweepMode::FixedTimeBlock { target } => {
            if !(target > 0.0) {
                return Err(FkError::BadBlockTarget(target));
            }
            let blocks = (ntot / target).floor();
            if blocks < 1.0 {
                0
            } else {
                let scale = target / ntot;
                let nk_b = nk.map(|v| v * scale);
                let mk_b = mk.map(|v| v * scale);
                let est = decoy_bounds(nk_b, mk_b, config, &inputs.params)?;
                let leak = leak_accounting(target, qber, inputs.ec_efficiency);
                blocks as u64 * key_length(&est, leak, &inputs.params)
            }
        }
    };

    let elapsed = n_pulses / config.pulse_rate;
    let skr_bps =
        if elapsed > 0.0 { secret_key_rate(key_length_bits, elapsed)? } else { 0.0 };
    Ok(CurveRow {
        x: length_km,
        loss_db: link.total_loss_db(),
        transmittance: eta_ch,
        qber,
        key_length_bits,
        skr_bps,
    })
}

/// SKR-vs-distance curve, whole-run blocks.
pub fn sweep_distance(
    inputs: &PipelineInputs,
    distances: &[f64],
) -> Result<Vec<CurveRow>, FkError> {
    sweep_distance_with(inputs, distances, SweepMode::FixedPulses)
}

pub fn sweep_distance_with(
    inputs: &PipelineInputs,
    distances: &[f64],
    mode: SweepMode,
) -> Result<Vec<CurveRow>, FkError> {
    if distances.is_empty() {
        return Err(FkError::EmptyGrid);
    }
    distances
        .iter()
        .map(|&km| evaluate_point(inputs, km, inputs.e_mis, mode))
        .collect()
}

/// SKR-vs-misalignment curve with the environment frozen at each θ
/// (e_mis = sin²θ); the link length comes from the inputs.
pub fn sweep_misalignment(
    inputs: &PipelineInputs,
    thetas: &[f64],
) -> Result<Vec<CurveRow>, FkError> {
    sweep_misalignment_with(inputs, thetas, SweepMode::FixedPulses)
}

pub fn sweep_misalignment_with(
    inputs: &PipelineInputs,
    thetas: &[f64],
    mode: SweepMode,
) -> Result<Vec<CurveRow>, FkError> {
    if thetas.is_empty() {
        return Err(FkError::EmptyGrid);
    }
    thetas
        .iter()
        .map(|&theta| {
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
                return Err(FkError::BadTheta(theta));
            }
            let mut row =
                evaluate_point(inputs, inputs.length_km, emis_from_theta(theta), mode)?;
            row.x = theta;
            Ok(row)
        })
        .collect()
}

/// Fixed 6-significant-digit decimal formatting ('.' separator) used by
/// every CSV and report the toolkit writes; integers above 10^5 keep all
/// their digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0.00000".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Serializes curve rows to CSV. `x_label` is `distance_km` or
/// `theta_rad` depending on the sweep.
pub fn curve_csv(rows: &[CurveRow], x_label: &str) -> String {
    let mut out = format!("{x_label},loss_db,transmittance,qber,key_length_bits,skr_bps\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_sig6(row.x),
            format_sig6(row.loss_db),
            format_sig6(row.transmittance),
            format_sig6(row.qber),
            row.key_length_bits,
            format_sig6(row.skr_bps),
        ));
    }
    out
}
