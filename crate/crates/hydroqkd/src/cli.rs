//! Command-line front end: `init`, `simulate`, `sweep-distance`,
//! `sweep-misalignment`, `encrypt`, `decrypt`, and `plan`.
//!
//! Exit codes are fixed for scripting: 0 success, 2 configuration or
//! usage error, 3 protocol abort (QBER threshold), 4 key exhaustion,
//! 5 ledger conflict. Every command is deterministic given the scenario
//! file, grid, and seed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bitops::{decode_ascii7, encode_ascii7, BitError, BitString};
use crate::channel::{mean_emis, ChannelError};
use crate::crypto::{otp_decrypt, otp_encrypt, plan_mode, CryptoError, KeyStore};
use crate::finitekey::{
    curve_csv, decoy_estimate, evaluate_point, format_sig6, key_length, secret_key_rate,
    sweep_distance, sweep_misalignment, FkError, SweepMode,
};
use crate::montecarlo::{run_session, McError};
use crate::postproc::{
    abort_check, correct_errors, estimate_qber, privacy_amplify, PpError, SiftedKeyPair, Verdict,
};
use crate::scenario::{reference_toml, Scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_EXHAUSTION: i32 = 4;
pub const EXIT_LEDGER: i32 = 5;

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_CONFIG, message: message.into() }
    }

    fn abort(message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_ABORT, message: message.into() }
    }

    fn ledger(message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_LEDGER, message: message.into() }
    }
}

macro_rules! config_errors {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::config(e.to_string())
            }
        }
    )*};
}

config_errors!(ScenarioError, McError, ChannelError, FkError, PpError, BitError, std::io::Error);

impl From<CryptoError> for CliError {
    fn from(e: CryptoError) -> Self {
        let exit_code = match &e {
            CryptoError::Exhausted { .. } => EXIT_EXHAUSTION,
            CryptoError::LedgerConflict(_)
            | CryptoError::MalformedLedger { .. }
            | CryptoError::NonceReused(_) => EXIT_LEDGER,
            _ => EXIT_CONFIG,
        };
        CliError { exit_code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hydroqkd",
    version,
    about = "Decoy-state BB84 simulator and key toolkit for noisy fiber links"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the commented reference scenario file
    Init {
        /// Destination path for the scenario
        #[arg(long, default_value = "scenario.toml")]
        out: PathBuf,
    },
    /// Run the full session pipeline and write the distilled key
    Simulate {
        /// Scenario file
        #[arg(long)]
        scenario: PathBuf,
        /// Key file to write
        #[arg(long, default_value = "session.key")]
        out: PathBuf,
        /// Session seed, overriding the scenario's [run] seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Secret key rate versus fiber length (CSV)
    SweepDistance {
        #[arg(long)]
        scenario: PathBuf,
        /// CSV file to write
        #[arg(long, default_value = "distance.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated lengths in km
        #[arg(long)]
        grid: String,
    },
    /// Secret key rate versus misalignment angle (CSV)
    SweepMisalignment {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "misalignment.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated angles in degrees
        #[arg(long)]
        grid: String,
    },
    /// One-time-pad a message file with ledgered key material
    Encrypt {
        /// ASCII message file
        #[arg(long)]
        message: PathBuf,
        /// Key file (lowercase hex lines)
        #[arg(long)]
        key: PathBuf,
        /// Allocation ledger beside the key file
        #[arg(long)]
        ledger: PathBuf,
        /// Ciphertext file to write
        #[arg(long, default_value = "message.ct")]
        out: PathBuf,
    },
    /// Invert an encryption recorded in the ledger
    Decrypt {
        /// Ciphertext file (bit groups)
        #[arg(long)]
        ciphertext: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        /// Plaintext file to write
        #[arg(long, default_value = "message.txt")]
        out: PathBuf,
    },
    /// Decide OTP versus authentication-only for a classical bandwidth
    Plan {
        /// Scenario used to evaluate the achievable SKR
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Required classical bandwidth in bits per second
        #[arg(long)]
        bandwidth: f64,
        /// Skip the pipeline and use this SKR (bits per second)
        #[arg(long)]
        skr: Option<f64>,
    },
}

/// Executes a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Init { out } => cmd_init(&out),
        Command::Simulate { scenario, out, seed } => cmd_simulate(&scenario, &out, seed),
        Command::SweepDistance { scenario, out, seed, grid } => {
            cmd_sweep_distance(&scenario, &out, seed, &grid)
        }
        Command::SweepMisalignment { scenario, out, seed, grid } => {
            cmd_sweep_misalignment(&scenario, &out, seed, &grid)
        }
        Command::Encrypt { message, key, ledger, out } => {
            cmd_encrypt(&message, &key, &ledger, &out)
        }
        Command::Decrypt { ciphertext, key, ledger, out } => {
            cmd_decrypt(&ciphertext, &key, &ledger, &out)
        }
        Command::Plan { scenario, bandwidth, skr } => {
            cmd_plan(scenario.as_deref(), bandwidth, skr)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.exit_code
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::from_file(path)?;
    if let Some(seed) = seed {
        scenario.run.seed = seed;
    }
    Ok(scenario)
}

fn parse_grid(grid: &str) -> Result<Vec<f64>, CliError> {
    let values = grid
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::config(format!("bad grid value: {s}"))))
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err(CliError::config("grid is empty"));
    }
    Ok(values)
}

/// Writes the reference scenario.
pub fn cmd_init(out: &Path) -> Result<(), CliError> {
    fs::write(out, reference_toml())?;
    println!("wrote reference scenario to {}", out.display());
    Ok(())
}

/// Full session: Monte Carlo, bounded decoy estimation, sampled QBER
/// with abort check, Hamming reconciliation (parity counts are the
/// error-correction leak), key-length formula, Toeplitz amplification,
/// key file.
pub fn cmd_simulate(scenario_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path, seed)?;
    scenario.validate()?;
    let config = scenario.simulation_config()?;
    let link = scenario.fiber_link()?;
    let det = scenario.detector_model()?;
    let env = scenario.environment_profile()?;
    let params = scenario.security_params()?;
    let gain = scenario.environment.stabilization_gain;

    let (tally, alice, bob) = run_session(&config, &link, &det, &env, gain)?;
    let sifted = SiftedKeyPair::new(alice, bob).map_err(|e| CliError::config(e.to_string()))?;
    let estimate = decoy_estimate(&tally, &config, &params)?;

    // Disclosure sampling runs on its own deterministic stream so the
    // simulation stream stays untouched by post-processing.
    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed);
    sample_rng.set_stream(1);
    let (qber, remaining) = if sifted.is_empty() {
        (0.0, sifted)
    } else {
        estimate_qber(&sifted, scenario.postprocessing.sample_fraction, &mut sample_rng)?
    };
    if abort_check(qber, scenario.postprocessing.qber_threshold) == Verdict::Abort {
        return Err(CliError::abort(format!(
            "estimated QBER {} exceeds threshold {}; no key written",
            format_sig6(qber),
            format_sig6(scenario.postprocessing.qber_threshold)
        )));
    }

    let (corrected, leaked_parity) = correct_errors(&remaining);
    let ell = key_length(&estimate, leaked_parity as f64, &params);
    // The written key is nibble-aligned so the hex key file is exact.
    let target = (ell.min(corrected.len() as u64) / 4 * 4) as usize;

    let key_bits = if target == 0 {
        BitString::new()
    } else {
        let mut pa_rng = ChaCha8Rng::seed_from_u64(config.seed);
        pa_rng.set_stream(2);
        let seed_bits = BitString::random(&mut pa_rng, corrected.len() + target - 1);
        privacy_amplify(
            &corrected.alice,
            target,
            &seed_bits,
            params.epsilon_sec,
            &format!("session-{}", config.seed),
        )?
        .bits
    };

    let mut store = KeyStore::empty();
    if !key_bits.is_empty() {
        store.append_block(key_bits.clone());
    }
    store.write_key_file(out)?;

    let elapsed = tally.elapsed_time;
    let skr = if elapsed > 0.0 { secret_key_rate(key_bits.len() as u64, elapsed)? } else { 0.0 };
    println!("scenario: {}", scenario_path.display());
    println!("seed: {}", config.seed);
    println!("fiber loss (dB): {}", format_sig6(link.total_loss_db()));
    println!("channel transmittance: {}", format_sig6(link.transmittance()));
    println!("pulses sent: {}", config.pulse_count);
    println!("sifted bits: {}", tally.sifted_total());
    println!("estimated qber: {}", format_sig6(qber));
    println!("error-corrected bits: {}", corrected.len());
    println!("parity bits leaked: {leaked_parity}");
    println!("secure key length (bits): {}", key_bits.len());
    println!("secret key rate (b/s): {}", format_sig6(skr));
    println!("elapsed time (s): {}", format_sig6(elapsed));
    println!("key file: {}", out.display());
    Ok(())
}

/// Analytic SKR-vs-distance sweep over a km grid.
pub fn cmd_sweep_distance(
    scenario_path: &Path,
    out: &Path,
    seed: Option<u64>,
    grid: &str,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path, seed)?;
    scenario.validate()?;
    let grid = parse_grid(grid)?;
    let inputs = scenario.pipeline_inputs(run_mean_emis(&scenario)?)?;
    let rows = sweep_distance(&inputs, &grid)?;
    fs::write(out, curve_csv(&rows, "distance_km"))?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

/// Analytic SKR-vs-misalignment sweep; the grid is given in degrees and
/// reported in radians.
pub fn cmd_sweep_misalignment(
    scenario_path: &Path,
    out: &Path,
    seed: Option<u64>,
    grid: &str,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path, seed)?;
    scenario.validate()?;
    let thetas: Vec<f64> = parse_grid(grid)?.iter().map(|d| d.to_radians()).collect();
    let inputs = scenario.pipeline_inputs(0.0)?;
    let rows = sweep_misalignment(&inputs, &thetas)?;
    fs::write(out, curve_csv(&rows, "theta_rad"))?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn run_mean_emis(scenario: &Scenario) -> Result<f64, CliError> {
    let env = scenario.environment_profile()?;
    Ok(mean_emis(
        &env,
        scenario.environment.stabilization_gain,
        scenario.source.pulse_count,
        scenario.source.pulse_rate,
    )?)
}

/// One-time-pads an ASCII message file against the next unconsumed key
/// bits, recording the allocation in the ledger.
pub fn cmd_encrypt(
    message_path: &Path,
    key_path: &Path,
    ledger_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let text = fs::read_to_string(message_path)?;
    let message = encode_ascii7(&text)?;
    let mut store = KeyStore::from_files(key_path, ledger_path)?;
    let ciphertext = otp_encrypt(&message, &mut store)?;
    fs::write(out, format_bit_groups(&ciphertext))?;
    store.write_ledger_file(ledger_path)?;
    println!(
        "encrypted {} characters ({} bits) to {}",
        text.chars().count(),
        ciphertext.len(),
        out.display()
    );
    Ok(())
}

/// Decrypts a ciphertext file against the ledgered allocation that
/// produced it (the most recent `otp-encrypt` entry of matching width).
pub fn cmd_decrypt(
    ciphertext_path: &Path,
    key_path: &Path,
    ledger_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let ciphertext: BitString = fs::read_to_string(ciphertext_path)?
        .parse()
        .map_err(|e: BitError| CliError::config(e.to_string()))?;
    let store = KeyStore::from_files(key_path, ledger_path)?;
    let entry = store
        .ledger()
        .iter()
        .rev()
        .find(|e| e.purpose == "otp-encrypt" && e.end_bit - e.start_bit == ciphertext.len())
        .ok_or_else(|| {
            CliError::ledger(format!(
                "no otp-encrypt allocation of {} bits recorded in {}",
                ciphertext.len(),
                ledger_path.display()
            ))
        })?;
    let key_bits = store
        .bits_for(entry)
        .ok_or_else(|| CliError::ledger("ledger entry exceeds key material".to_string()))?;
    let plain = otp_decrypt(&ciphertext, &key_bits)?;
    fs::write(out, decode_ascii7(&plain)?)?;
    println!("decrypted {} bits to {}", ciphertext.len(), out.display());
    Ok(())
}

/// Compares the achievable SKR with the required classical bandwidth.
pub fn cmd_plan(
    scenario_path: Option<&Path>,
    bandwidth: f64,
    skr_override: Option<f64>,
) -> Result<(), CliError> {
    if !(bandwidth >= 0.0) {
        return Err(CliError::config(format!("bandwidth must be ≥ 0, got {bandwidth}")));
    }
    let skr = match (skr_override, scenario_path) {
        (Some(skr), _) => skr,
        (None, Some(path)) => {
            let scenario = load_scenario(path, None)?;
            scenario.validate()?;
            let inputs = scenario.pipeline_inputs(run_mean_emis(&scenario)?)?;
            evaluate_point(&inputs, scenario.link.length_km, inputs.e_mis, SweepMode::FixedPulses)?
                .skr_bps
        }
        (None, None) => {
            return Err(CliError::config("plan needs --scenario or --skr"));
        }
    };
    let mode = plan_mode(skr, bandwidth);
    println!("secret key rate (b/s): {}", format_sig6(skr));
    println!("required bandwidth (b/s): {}", format_sig6(bandwidth));
    println!("mode: {}", mode.name());
    Ok(())
}

/// Ciphertext file layout: 7-bit groups separated by spaces, matching
/// the character framing of the ASCII encoding.
fn format_bit_groups(bits: &BitString) -> String {
    let mut out = String::new();
    for (i, b) in bits.iter().enumerate() {
        if i > 0 && i % 7 == 0 {
            out.push(' ');
        }
        out.push(if b == 1 { '1' } else { '0' });
    }
    out.push('\n');
    out
}
