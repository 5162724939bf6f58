//! Fiber-loss, detector, and error models — γ = a·L, η_ch = 10^(−0.2L/10),
//! the detection rate D_k, and the per-intensity error rate e_k — plus the
//! hydropower vibration environment that turns mm-scale machinery motion
//! into a time-varying polarization misalignment, with an optional
//! first-order feedback compensator.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("fiber length must be ≥ 0 km, got {0}")]
    NegativeLength(f64),
    #[error("fiber attenuation must be > 0 dB/km, got {0}")]
    BadAttenuation(f64),
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("noise source frequency must be > 0 Hz, got {0}")]
    BadFrequency(f64),
    #[error("noise source amplitude must be ≥ 0 mm, got {0}")]
    BadAmplitude(f64),
    #[error("noise source coupling must be ≥ 0 rad/mm, got {0}")]
    BadCoupling(f64),
    #[error("degenerate channel: zero detection rate with error rate {0}")]
    DegenerateChannel(f64),
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), ChannelError> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ChannelError::OutOfRange { name, value, lo, hi })
    }
}

/// Fiber span: attenuation a (dB/km) and length L (km).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberLink {
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
}

impl FiberLink {
    pub fn new(attenuation_db_per_km: f64, length_km: f64) -> Result<Self, ChannelError> {
        if !(attenuation_db_per_km > 0.0) {
            return Err(ChannelError::BadAttenuation(attenuation_db_per_km));
        }
        if !(length_km >= 0.0) {
            return Err(ChannelError::NegativeLength(length_km));
        }
        Ok(Self { attenuation_db_per_km, length_km })
    }

    /// Total loss γ = a·L in dB.
    pub fn total_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
    }

    /// Photon survival probability 10^(−γ/10) for this link. Coincides
    /// with [`channel_transmittance`] at the nominal 0.2 dB/km.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.total_loss_db() / 10.0)
    }
}

/// Total loss γ = a·L in dB.
pub fn total_loss_db(link: &FiberLink) -> f64 {
    link.total_loss_db()
}

/// Channel transmittance η_ch = 10^(−0.2·L/10) at the nominal fiber
/// attenuation of 0.2 dB/km; strictly decreasing in L, in (0, 1].
pub fn channel_transmittance(length_km: f64) -> Result<f64, ChannelError> {
    if !(length_km >= 0.0) {
        return Err(ChannelError::NegativeLength(length_km));
    }
    Ok(10f64.powf(-0.2 * length_km / 10.0))
}

/// Single-photon detector: dark-count probability per gate p_dc,
/// after-pulse probability p_ap, and quantum efficiency η_det.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub dark_count_prob: f64,
    pub after_pulse_prob: f64,
    pub efficiency: f64,
}

impl DetectorModel {
    pub fn new(
        dark_count_prob: f64,
        after_pulse_prob: f64,
        efficiency: f64,
    ) -> Result<Self, ChannelError> {
        check_range("dark_count_prob", dark_count_prob, 0.0, 0.5)?;
        check_range("after_pulse_prob", after_pulse_prob, 0.0, 1.0)?;
        check_range("efficiency", efficiency, 0.0, 1.0)?;
        Ok(Self { dark_count_prob, after_pulse_prob, efficiency })
    }
}

/// Detection rate D_k = 1 − (1 − 2·p_dc)·e^(−η·k) for a pulse of mean
/// photon number k seen through total transmittance η (two-detector
/// dark-count convention: either detector may fire).
pub fn detection_rate(intensity_k: f64, eta: f64, det: &DetectorModel) -> f64 {
    debug_assert!(intensity_k >= 0.0 && (0.0..=1.0).contains(&eta));
    1.0 - (1.0 - 2.0 * det.dark_count_prob) * (-eta * intensity_k).exp()
}

/// Per-intensity error rate
/// e_k = p_dc + e_mis·(1 − e^(−η·k)) + p_ap·D_k/2.
///
/// `eta` is whatever transmittance the caller models: the bare fiber η_ch
/// reproduces the textbook formula, while the simulation pipeline passes
/// η_ch·η_det so detector efficiency folds in. Errors if the channel is
/// degenerate (no detections yet a nonzero error rate).
pub fn error_model(
    intensity_k: f64,
    eta: f64,
    det: &DetectorModel,
    e_mis: f64,
) -> Result<f64, ChannelError> {
    check_range("e_mis", e_mis, 0.0, 1.0)?;
    let d_k = detection_rate(intensity_k, eta, det);
    let e_k = det.dark_count_prob
        + e_mis * (1.0 - (-eta * intensity_k).exp())
        + det.after_pulse_prob * d_k / 2.0;
    if d_k == 0.0 && e_k > 0.0 {
        return Err(ChannelError::DegenerateChannel(e_k));
    }
    Ok(e_k)
}

/// The per-intensity QBER reported downstream: min(e_k/D_k, 1/2), or 0 for
/// a channel with no detections at all.
pub fn qber_model(
    intensity_k: f64,
    eta: f64,
    det: &DetectorModel,
    e_mis: f64,
) -> Result<f64, ChannelError> {
    let e_k = error_model(intensity_k, eta, det, e_mis)?;
    let d_k = detection_rate(intensity_k, eta, det);
    if d_k == 0.0 {
        return Ok(0.0);
    }
    Ok((e_k / d_k).min(0.5))
}

/// One vibrating machine: frequency, displacement amplitude, linear
/// vibration→polarization coupling, and phase offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSource {
    pub frequency_hz: f64,
    pub amplitude_mm: f64,
    pub coupling_rad_per_mm: f64,
    pub phase_rad: f64,
}

impl NoiseSource {
    pub fn new(
        frequency_hz: f64,
        amplitude_mm: f64,
        coupling_rad_per_mm: f64,
        phase_rad: f64,
    ) -> Result<Self, ChannelError> {
        if !(frequency_hz > 0.0) {
            return Err(ChannelError::BadFrequency(frequency_hz));
        }
        if !(amplitude_mm >= 0.0) {
            return Err(ChannelError::BadAmplitude(amplitude_mm));
        }
        if !(coupling_rad_per_mm >= 0.0) {
            return Err(ChannelError::BadCoupling(coupling_rad_per_mm));
        }
        Ok(Self { frequency_hz, amplitude_mm, coupling_rad_per_mm, phase_rad })
    }

    fn angle_at(&self, t: f64) -> f64 {
        self.coupling_rad_per_mm
            * self.amplitude_mm
            * (std::f64::consts::TAU * self.frequency_hz * t + self.phase_rad).sin()
    }
}

/// Plant environment: a baseline misalignment plus superposed sinusoidal
/// rotations, one per machine.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvironmentProfile {
    pub baseline_theta_rad: f64,
    pub sources: Vec<NoiseSource>,
}

impl EnvironmentProfile {
    pub fn new(baseline_theta_rad: f64, sources: Vec<NoiseSource>) -> Result<Self, ChannelError> {
        check_range("baseline_theta_rad", baseline_theta_rad, 0.0, std::f64::consts::FRAC_PI_2)?;
        Ok(Self { baseline_theta_rad, sources })
    }

    /// A perfectly quiet environment frozen at one misalignment angle.
    pub fn frozen(theta_rad: f64) -> Result<Self, ChannelError> {
        Self::new(theta_rad, Vec::new())
    }

    /// θ(t) = θ0 + Σ_i coupling_i·A_i·sin(2π·f_i·t + φ_i).
    pub fn theta_at(&self, t: f64) -> f64 {
        self.baseline_theta_rad + self.sources.iter().map(|s| s.angle_at(t)).sum::<f64>()
    }
}

/// Misalignment angle and flip probability e_mis = sin²θ(t) at time t.
pub fn misalignment_at(profile: &EnvironmentProfile, t: f64) -> (f64, f64) {
    let theta = profile.theta_at(t);
    (theta, emis_from_theta(theta))
}

/// sin²θ clamped into [0, 1].
pub fn emis_from_theta(theta: f64) -> f64 {
    theta.sin().powi(2).clamp(0.0, 1.0)
}

/// One feedback step: the compensator holds `state` (its current angle),
/// corrects the raw misalignment at time t, then moves toward the observed
/// raw angle by `gain`. Returns (corrected theta, updated state).
pub fn stabilize(
    profile: &EnvironmentProfile,
    gain: f64,
    t: f64,
    state: f64,
) -> Result<(f64, f64), ChannelError> {
    check_range("gain", gain, 0.0, 1.0)?;
    let raw = profile.theta_at(t);
    Ok(step_compensator(raw, gain, state))
}

fn step_compensator(raw: f64, gain: f64, state: f64) -> (f64, f64) {
    let corrected = raw - state;
    let next_state = state + gain * (raw - state);
    (corrected, next_state)
}

/// Stateful convenience over [`stabilize`] for gate-by-gate loops.
#[derive(Debug, Clone, Copy)]
pub struct Compensator {
    gain: f64,
    state: f64,
}

impl Compensator {
    pub fn new(gain: f64) -> Result<Self, ChannelError> {
        check_range("gain", gain, 0.0, 1.0)?;
        Ok(Self { gain, state: 0.0 })
    }

    /// Feeds one raw misalignment sample; returns the corrected angle.
    pub fn step(&mut self, raw_theta: f64) -> f64 {
        let (corrected, next) = step_compensator(raw_theta, self.gain, self.state);
        self.state = next;
        corrected
    }

    pub fn state(&self) -> f64 {
        self.state
    }
}

/// Mean of e_mis = sin²(θ_corrected) over `gates` uniformly spaced gate
/// times at `pulse_rate`, stepping the compensator at every sampled gate.
/// Exact for runs of up to a million gates; longer horizons are strided
/// down to ≤ 10^6 samples (documented approximation for analytic sweeps).
pub fn mean_emis(
    profile: &EnvironmentProfile,
    gain: f64,
    gates: u64,
    pulse_rate: f64,
) -> Result<f64, ChannelError> {
    check_range("gain", gain, 0.0, 1.0)?;
    if gates == 0 {
        return Ok(misalignment_at(profile, 0.0).1);
    }
    // A frozen environment needs no averaging at all.
    if profile.sources.iter().all(|s| s.amplitude_mm * s.coupling_rad_per_mm == 0.0) && gain == 0.0
    {
        return Ok(misalignment_at(profile, 0.0).1);
    }
    const MAX_SAMPLES: u64 = 1_000_000;
    let stride = gates.div_ceil(MAX_SAMPLES).max(1);
    let mut comp = Compensator::new(gain)?;
    let mut acc = 0.0;
    let mut n = 0u64;
    let mut i = 0u64;
    while i < gates {
        let t = i as f64 / pulse_rate;
        let corrected = comp.step(profile.theta_at(t));
        acc += emis_from_theta(corrected);
        n += 1;
        i += stride;
    }
    Ok(acc / n as f64)
}
