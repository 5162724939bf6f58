//! Desk-scale simulator and key toolkit for decoy-state BB84 quantum
//! key distribution over fiber in a noisy industrial environment
//! (vibration-driven polarization drift, generator hum), with finite-key
//! security analysis and an information-theoretic crypto layer for
//! consuming the distilled keys.
//!
//! Start with the runnable examples — each one walks a major
//! capability:
//!
//! - `bb84_walkthrough`: prepare/measure/sift on a hand-traceable exchange
//! - `channel_models`: fiber loss, detection, and QBER models
//! - `noise_environment`: plant noise, drift compensation, e_mis(t)
//! - `simulate_session`: the full session pipeline in library form
//! - `finite_key_budget`: how block size and the ε budget shape the key
//! - `sweep_curves`: SKR-vs-distance and SKR-vs-misalignment CSVs
//! - `otp_demo`: one-time pad with the use-once key store
//! - `secure_messaging`: OTP + ITS authentication over mirrored stores
//!
//! Run one with `cargo run --example simulate_session`.
//!
//! Modules, bottom up: [`bitops`] (bit strings, ASCII-7, entropy),
//! [`channel`] (loss/detector/noise models), [`protocol`] (BB84 states
//! and sifting), [`montecarlo`] (the pulse-level simulator),
//! [`finitekey`] (decoy estimation, key length, sweeps), [`postproc`]
//! (QBER sampling, Hamming(7,4), Toeplitz amplification), [`crypto`]
//! (OTP, ITS authentication, ledgered key store), [`scenario`] +
//! [`cli`] (the `hydroqkd` command-line front end).

pub mod bitops;
pub mod channel;
pub mod cli;
pub mod crypto;
pub mod finitekey;
pub mod montecarlo;
pub mod postproc;
pub mod protocol;
pub mod scenario;
