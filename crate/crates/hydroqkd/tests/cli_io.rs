//! Binary-level checks of the CLI: file formats, report lines, and the
//! exit-code contract (0 ok, 2 config, 3 abort, 4 exhaustion, 5 ledger).

use std::ffi::OsStr;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hydroqkd::scenario::Scenario;

fn qkd<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_hydroqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn path_arg(path: &Path) -> &OsStr {
    path.as_os_str()
}

#[test]
fn init_writes_the_reference_scenario() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario_path = dir.path().join("scenario.toml");

    let out = qkd([OsStr::new("init"), OsStr::new("--out"), path_arg(&scenario_path)]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    // The template must parse back to the built-in defaults.
    let parsed = Scenario::from_file(&scenario_path).expect("template parses");
    assert_eq!(parsed, Scenario::default());

    let text = fs::read_to_string(&scenario_path).expect("readable file");
    assert!(text.contains("[link]"), "template must document the link section");
    assert!(text.starts_with('#'), "template opens with a comment header");
}

#[test]
fn simulate_reports_and_honors_seed_override() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario_path = dir.path().join("plant.toml");
    fs::write(&scenario_path, "[source]\npulse_count = 400000\n").expect("write scenario");
    let key_path = dir.path().join("session.key");

    let out = qkd([
        OsStr::new("simulate"),
        OsStr::new("--scenario"),
        path_arg(&scenario_path),
        OsStr::new("--out"),
        path_arg(&key_path),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report = stdout(&out);
    for line in [
        "scenario: ",
        "seed: 42",
        "pulses sent: 400000",
        "sifted bits: ",
        "estimated qber: ",
        "secure key length (bits): ",
        "key file: ",
    ] {
        assert!(report.contains(line), "report missing {line:?}:\n{report}");
    }
    assert!(key_path.exists(), "simulate must write the key file");

    let out = qkd([
        OsStr::new("simulate"),
        OsStr::new("--scenario"),
        path_arg(&scenario_path),
        OsStr::new("--out"),
        path_arg(&key_path),
        OsStr::new("--seed"),
        OsStr::new("7"),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("seed: 7"), "--seed must override the scenario");
}

#[test]
fn simulate_aborts_on_high_qber() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario_path = dir.path().join("hot.toml");
    // 45 degrees of static misalignment: e_mis = 0.5, far over threshold.
    fs::write(
        &scenario_path,
        "[source]\npulse_count = 200000\n\n[environment]\nbaseline_theta_rad = 0.7853981633974483\nsources = []\n",
    )
    .expect("write scenario");
    let key_path = dir.path().join("never.key");

    let out = qkd([
        OsStr::new("simulate"),
        OsStr::new("--scenario"),
        path_arg(&scenario_path),
        OsStr::new("--out"),
        path_arg(&key_path),
    ]);
    assert_eq!(code(&out), 3, "abort must exit 3");
    assert!(stderr(&out).contains("exceeds threshold"));
    assert!(!key_path.exists(), "aborted session must not write a key");
}

#[test]
fn sweep_distance_writes_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario_path = dir.path().join("scenario.toml");
    qkd([OsStr::new("init"), OsStr::new("--out"), path_arg(&scenario_path)]);
    let csv_path = dir.path().join("distance.csv");

    let out = qkd([
        OsStr::new("sweep-distance"),
        OsStr::new("--scenario"),
        path_arg(&scenario_path),
        OsStr::new("--out"),
        path_arg(&csv_path),
        OsStr::new("--grid"),
        OsStr::new("1,25,50,100"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(&csv_path).expect("csv written");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "distance_km,loss_db,transmittance,qber,key_length_bits,skr_bps");
    assert_eq!(lines.len(), 5, "header plus one row per grid point");
    let key_bits: Vec<u64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(4).expect("column").parse().expect("integer"))
        .collect();
    assert!(key_bits.windows(2).all(|w| w[0] >= w[1]), "lengths nonincreasing");
}

#[test]
fn sweep_misalignment_writes_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario_path = dir.path().join("scenario.toml");
    qkd([OsStr::new("init"), OsStr::new("--out"), path_arg(&scenario_path)]);
    let csv_path = dir.path().join("misalignment.csv");

    let out = qkd([
        OsStr::new("sweep-misalignment"),
        OsStr::new("--scenario"),
        path_arg(&scenario_path),
        OsStr::new("--out"),
        path_arg(&csv_path),
        OsStr::new("--grid"),
        OsStr::new("0,10,25"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(&csv_path).expect("csv written");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "theta_rad,loss_db,transmittance,qber,key_length_bits,skr_bps");
    assert_eq!(lines.len(), 4);
    // Grid is given in degrees; rows carry radians.
    assert!(lines[1].starts_with("0.00000,"));
    assert!(lines[2].starts_with("0.174533,"), "10 degrees in radians: {}", lines[2]);
    // Perfect alignment tops the curve.
    let skr: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(5).expect("column").parse().expect("float"))
        .collect();
    assert!(skr.iter().all(|&s| s <= skr[0]), "row at 0 degrees must have maximal skr");
}

#[test]
fn encrypt_decrypt_round_trip_and_exhaustion() {
    let dir = tempfile::tempdir().expect("tempdir");
    let message_path = dir.path().join("message.txt");
    let key_path = dir.path().join("pool.key");
    let ledger_path = dir.path().join("pool.ledger");
    let ct_path = dir.path().join("message.ct");
    let pt_path = dir.path().join("recovered.txt");

    fs::write(&message_path, "dam").expect("write message");
    // 24 bits of key whose first 21 bits spell "key" in 7-bit ASCII.
    fs::write(&key_path, "d797c8\n").expect("write key");

    let out = qkd([
        OsStr::new("encrypt"),
        OsStr::new("--message"),
        path_arg(&message_path),
        OsStr::new("--key"),
        path_arg(&key_path),
        OsStr::new("--ledger"),
        path_arg(&ledger_path),
        OsStr::new("--out"),
        path_arg(&ct_path),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(
        fs::read_to_string(&ct_path).expect("ciphertext written"),
        "0001111 0000100 0010100\n",
        "worked-example ciphertext"
    );
    assert_eq!(
        fs::read_to_string(&ledger_path).expect("ledger written"),
        "otp-encrypt,0,21,1\n"
    );

    let out = qkd([
        OsStr::new("decrypt"),
        OsStr::new("--ciphertext"),
        path_arg(&ct_path),
        OsStr::new("--key"),
        path_arg(&key_path),
        OsStr::new("--ledger"),
        path_arg(&ledger_path),
        OsStr::new("--out"),
        path_arg(&pt_path),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(fs::read_to_string(&pt_path).expect("plaintext written"), "dam");

    // Only 3 unused bits remain, so a second message must be refused
    // without touching the ledger.
    let out = qkd([
        OsStr::new("encrypt"),
        OsStr::new("--message"),
        path_arg(&message_path),
        OsStr::new("--key"),
        path_arg(&key_path),
        OsStr::new("--ledger"),
        path_arg(&ledger_path),
        OsStr::new("--out"),
        path_arg(&ct_path),
    ]);
    assert_eq!(code(&out), 4, "exhaustion must exit 4");
    assert_eq!(
        fs::read_to_string(&ledger_path).expect("ledger intact"),
        "otp-encrypt,0,21,1\n",
        "failed draw must not extend the ledger"
    );
}

#[test]
fn decrypt_without_matching_allocation_exits_5() {
    let dir = tempfile::tempdir().expect("tempdir");
    let key_path = dir.path().join("pool.key");
    let ledger_path = dir.path().join("pool.ledger");
    let ct_path = dir.path().join("message.ct");
    fs::write(&key_path, "d797c8\n").expect("write key");
    fs::write(&ledger_path, "auth-mask,0,21,1\n").expect("write ledger");
    fs::write(&ct_path, "0001111 0000100 0010100\n").expect("write ciphertext");

    let out = qkd([
        OsStr::new("decrypt"),
        OsStr::new("--ciphertext"),
        path_arg(&ct_path),
        OsStr::new("--key"),
        path_arg(&key_path),
        OsStr::new("--ledger"),
        path_arg(&ledger_path),
    ]);
    assert_eq!(code(&out), 5, "missing allocation is a ledger failure");
    assert!(stderr(&out).contains("no otp-encrypt allocation"));
}

#[test]
fn malformed_ledger_exits_5() {
    let dir = tempfile::tempdir().expect("tempdir");
    let message_path = dir.path().join("message.txt");
    let key_path = dir.path().join("pool.key");
    let ledger_path = dir.path().join("pool.ledger");
    fs::write(&message_path, "dam").expect("write message");
    fs::write(&key_path, "d797c8\n").expect("write key");
    fs::write(&ledger_path, "otp-encrypt,zz,21,1\n").expect("write ledger");

    let out = qkd([
        OsStr::new("encrypt"),
        OsStr::new("--message"),
        path_arg(&message_path),
        OsStr::new("--key"),
        path_arg(&key_path),
        OsStr::new("--ledger"),
        path_arg(&ledger_path),
    ]);
    assert_eq!(code(&out), 5, "unreadable ledger is a ledger failure");
}

#[test]
fn configuration_failures_exit_2() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario_path = dir.path().join("scenario.toml");
    qkd([OsStr::new("init"), OsStr::new("--out"), path_arg(&scenario_path)]);

    // Missing scenario file.
    let out = qkd([
        OsStr::new("simulate"),
        OsStr::new("--scenario"),
        OsStr::new("no-such-file.toml"),
    ]);
    assert_eq!(code(&out), 2);

    // Unknown field in an otherwise valid file.
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[source]\nbogus = 1\n").expect("write scenario");
    let out = qkd([OsStr::new("simulate"), OsStr::new("--scenario"), path_arg(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown field"));

    // Empty and unparsable sweep grids.
    for grid in ["", "abc"] {
        let out = qkd([
            OsStr::new("sweep-distance"),
            OsStr::new("--scenario"),
            path_arg(&scenario_path),
            OsStr::new("--out"),
            path_arg(&dir.path().join("d.csv")),
            OsStr::new("--grid"),
            OsStr::new(grid),
        ]);
        assert_eq!(code(&out), 2, "grid {grid:?} must be rejected");
    }

    // Plan with neither a scenario nor an SKR figure.
    let out = qkd([OsStr::new("plan"), OsStr::new("--bandwidth"), OsStr::new("2000")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn plan_prints_the_selected_mode() {
    let out = qkd(["plan", "--bandwidth", "2000", "--skr", "5000"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("mode: OTP"));

    let out = qkd(["plan", "--bandwidth", "2000", "--skr", "1000"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("mode: AUTH_ONLY"));

    // Equality reserves key for authentication.
    let out = qkd(["plan", "--bandwidth", "2000", "--skr", "2000"]);
    assert!(stdout(&out).contains("mode: AUTH_ONLY"));
}
