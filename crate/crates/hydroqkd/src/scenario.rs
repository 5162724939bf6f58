//! Scenario files: the sectioned key=value configuration format behind
//! every CLI command. Unknown fields are rejected, every section is
//! optional (missing sections take the documented defaults), and
//! `reference_toml` emits a fully commented template that parses back to
//! `Scenario::default()`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{DetectorModel, EnvironmentProfile, FiberLink, NoiseSource};
use crate::finitekey::{PipelineInputs, SecurityParams};
use crate::montecarlo::SimulationConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("[{section}] {message}")]
    Field { section: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn field_err(section: &'static str, err: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Field { section, message: err.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection { attenuation_db_per_km: 0.2, length_km: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub mu: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub p_mu: f64,
    pub p_nu1: f64,
    pub p_nu2: f64,
    pub basis_probability_x: f64,
    pub pulse_count: u64,
    pub pulse_rate: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            mu: 0.5,
            nu1: 0.1,
            nu2: 0.002,
            p_mu: 0.45,
            p_nu1: 0.30,
            p_nu2: 0.25,
            basis_probability_x: 0.5,
            pulse_count: 20_000_000,
            pulse_rate: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_count_prob: f64,
    pub after_pulse_prob: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection { efficiency: 0.25, dark_count_prob: 1e-6, after_pulse_prob: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSourceSection {
    pub frequency_hz: f64,
    pub amplitude_mm: f64,
    pub coupling_rad_per_mm: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub baseline_theta_rad: f64,
    pub stabilization_gain: f64,
    pub sources: Vec<NoiseSourceSection>,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        EnvironmentSection {
            baseline_theta_rad: 0.1,
            stabilization_gain: 0.0,
            sources: vec![
                NoiseSourceSection {
                    frequency_hz: 10.0,
                    amplitude_mm: 1.0,
                    coupling_rad_per_mm: 0.05,
                    phase_rad: 0.0,
                },
                NoiseSourceSection {
                    frequency_hz: 60.0,
                    amplitude_mm: 1.0,
                    coupling_rad_per_mm: 0.05,
                    phase_rad: 0.0,
                },
            ],
        }
    }
}

impl Default for NoiseSourceSection {
    fn default() -> Self {
        NoiseSourceSection {
            frequency_hz: 10.0,
            amplitude_mm: 0.0,
            coupling_rad_per_mm: 0.0,
            phase_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecuritySection {
    pub epsilon_sec: f64,
    pub epsilon_cor: f64,
}

impl Default for SecuritySection {
    fn default() -> Self {
        SecuritySection { epsilon_sec: 1e-9, epsilon_cor: 1e-15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostprocSection {
    pub sample_fraction: f64,
    pub qber_threshold: f64,
    pub ec_efficiency: f64,
}

impl Default for PostprocSection {
    fn default() -> Self {
        PostprocSection { sample_fraction: 0.1, qber_threshold: 0.11, ec_efficiency: 1.16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 42 }
    }
}

/// Complete run configuration, one section per module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub link: LinkSection,
    pub source: SourceSection,
    pub detector: DetectorSection,
    pub environment: EnvironmentSection,
    pub security: SecuritySection,
    pub postprocessing: PostprocSection,
    pub run: RunSection,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        Scenario::from_toml(&fs::read_to_string(path)?)
    }

    /// Checks every module invariant the file feeds into, reporting the
    /// offending section.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.fiber_link()?;
        self.detector_model()?;
        self.environment_profile()?;
        self.simulation_config()?;
        self.security_params()?;
        let g = self.environment.stabilization_gain;
        if !(0.0..=1.0).contains(&g) {
            return Err(field_err("environment", format!("stabilization_gain {g} outside [0, 1]")));
        }
        let pp = &self.postprocessing;
        if !(pp.sample_fraction > 0.0 && pp.sample_fraction <= 1.0) {
            return Err(field_err(
                "postprocessing",
                format!("sample_fraction {} outside (0, 1]", pp.sample_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&pp.qber_threshold) {
            return Err(field_err(
                "postprocessing",
                format!("qber_threshold {} outside [0, 1]", pp.qber_threshold),
            ));
        }
        if !(pp.ec_efficiency >= 1.0) {
            return Err(field_err(
                "postprocessing",
                format!("ec_efficiency {} must be ≥ 1", pp.ec_efficiency),
            ));
        }
        Ok(())
    }

    pub fn fiber_link(&self) -> Result<FiberLink, ScenarioError> {
        FiberLink::new(self.link.attenuation_db_per_km, self.link.length_km)
            .map_err(|e| field_err("link", e))
    }

    pub fn detector_model(&self) -> Result<DetectorModel, ScenarioError> {
        DetectorModel::new(
            self.detector.dark_count_prob,
            self.detector.after_pulse_prob,
            self.detector.efficiency,
        )
        .map_err(|e| field_err("detector", e))
    }

    pub fn environment_profile(&self) -> Result<EnvironmentProfile, ScenarioError> {
        let sources = self
            .environment
            .sources
            .iter()
            .map(|s| {
                NoiseSource::new(s.frequency_hz, s.amplitude_mm, s.coupling_rad_per_mm, s.phase_rad)
                    .map_err(|e| field_err("environment.sources", e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        EnvironmentProfile::new(self.environment.baseline_theta_rad, sources)
            .map_err(|e| field_err("environment", e))
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig, ScenarioError> {
        let s = &self.source;
        let config = SimulationConfig {
            pulse_count: s.pulse_count,
            mu: s.mu,
            nu1: s.nu1,
            nu2: s.nu2,
            p_mu: s.p_mu,
            p_nu1: s.p_nu1,
            p_nu2: s.p_nu2,
            basis_probability_x: s.basis_probability_x,
            pulse_rate: s.pulse_rate,
            seed: self.run.seed,
        };
        config.validate().map_err(|e| field_err("source", e))?;
        Ok(config)
    }

    pub fn security_params(&self) -> Result<SecurityParams, ScenarioError> {
        SecurityParams::new(self.security.epsilon_sec, self.security.epsilon_cor)
            .map_err(|e| field_err("security", e))
    }

    /// Projects the scenario onto the analytic sweep pipeline; `e_mis`
    /// must be supplied by the caller (run-mean for distance sweeps,
    /// per-θ for misalignment sweeps).
    pub fn pipeline_inputs(&self, e_mis: f64) -> Result<PipelineInputs, ScenarioError> {
        Ok(PipelineInputs {
            config: self.simulation_config()?,
            detector: self.detector_model()?,
            attenuation_db_per_km: self.link.attenuation_db_per_km,
            length_km: self.link.length_km,
            e_mis,
            params: self.security_params()?,
            ec_efficiency: self.postprocessing.ec_efficiency,
        })
    }
}

/// The generated reference scenario: every field at its default with a
/// one-line explanation. `init` writes this file.
pub fn reference_toml() -> String {
    r#"# Reference scenario: decoy-state BB84 over fiber in a hydropower
# noise environment. Every value shown is the default; a missing field
# or section falls back to it. Unknown fields are rejected.

[link]
attenuation_db_per_km = 0.2  # standard telecom fiber loss
length_km = 10.0             # one-way fiber length

[source]
mu = 0.5                     # signal mean photon number
nu1 = 0.1                    # decoy mean photon number
nu2 = 0.002                  # vacuum-class mean photon number
p_mu = 0.45                  # probability of sending a signal pulse
p_nu1 = 0.3                  # probability of sending a decoy pulse
p_nu2 = 0.25                 # probability of sending a vacuum pulse
basis_probability_x = 0.5    # X-basis choice probability (both parties)
pulse_count = 20000000       # gates per session
pulse_rate = 1000000.0       # gates per second

[detector]
efficiency = 0.25            # detector quantum efficiency
dark_count_prob = 0.000001   # dark-count probability per gate per detector
after_pulse_prob = 0.0       # after-pulse probability following a click

[environment]
baseline_theta_rad = 0.1     # static polarization misalignment
stabilization_gain = 0.0     # compensator feedback gain (0 disables)

# Mechanical noise sources coupling into polarization rotation.
[[environment.sources]]
frequency_hz = 10.0          # low-frequency structural vibration
amplitude_mm = 1.0
coupling_rad_per_mm = 0.05
phase_rad = 0.0

[[environment.sources]]
frequency_hz = 60.0          # generator hum
amplitude_mm = 1.0
coupling_rad_per_mm = 0.05
phase_rad = 0.0

[security]
epsilon_sec = 1e-9           # secrecy failure budget
epsilon_cor = 1e-15          # correctness failure budget

[postprocessing]
sample_fraction = 0.1        # fraction of sifted bits disclosed for QBER
qber_threshold = 0.11        # abort when the estimate exceeds this
ec_efficiency = 1.16         # reconciliation inefficiency f

[run]
seed = 42                    # session seed; --seed overrides
"#
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_template_parses_to_defaults() {
        let scenario = Scenario::from_toml(&reference_toml()).unwrap();
        assert_eq!(scenario, Scenario::default());
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Scenario::from_toml("").unwrap(), Scenario::default());
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let s = Scenario::from_toml("[link]\nlength_km = 50.0\n").unwrap();
        assert_eq!(s.link.length_km, 50.0);
        assert_eq!(s.link.attenuation_db_per_km, 0.2);
        assert_eq!(s.source.mu, 0.5);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Scenario::from_toml("[link]\nlenght_km = 50.0\n").is_err());
        assert!(Scenario::from_toml("[links]\nlength_km = 50.0\n").is_err());
        assert!(Scenario::from_toml("[detector]\ngain = 3.0\n").is_err());
    }

    #[test]
    fn invalid_values_name_the_section() {
        let err = Scenario::from_toml("[detector]\ndark_count_prob = 0.7\n").unwrap_err();
        assert!(err.to_string().starts_with("[detector]"), "got: {err}");
        let err = Scenario::from_toml("[source]\nmu = 0.05\n").unwrap_err();
        assert!(err.to_string().starts_with("[source]"), "got: {err}");
        let err = Scenario::from_toml("[postprocessing]\nsample_fraction = 0.0\n").unwrap_err();
        assert!(err.to_string().starts_with("[postprocessing]"), "got: {err}");
        let err = Scenario::from_toml("[environment]\nbaseline_theta_rad = 3.0\n").unwrap_err();
        assert!(err.to_string().starts_with("[environment]"), "got: {err}");
    }

    #[test]
    fn conversions_carry_the_seed_and_values() {
        let s = Scenario::from_toml("[run]\nseed = 7\n").unwrap();
        let config = s.simulation_config().unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.pulse_count, 20_000_000);
        let link = s.fiber_link().unwrap();
        assert_eq!(link.total_loss_db(), 2.0);
        let env = s.environment_profile().unwrap();
        assert_eq!(env.sources.len(), 2);
        let inputs = s.pipeline_inputs(0.01).unwrap();
        assert_eq!(inputs.e_mis, 0.01);
        assert_eq!(inputs.ec_efficiency, 1.16);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.toml");
        fs::write(&path, reference_toml()).unwrap();
        let s = Scenario::from_file(&path).unwrap();
        assert_eq!(s, Scenario::default());
        assert!(Scenario::from_file(&dir.path().join("missing.toml")).is_err());
    }
}
