//! Analytic fiber-channel and detector models.
//!
//! Prints the loss budget of a standard telecom fiber at several lengths,
//! then the per-intensity detection and error rates of a threshold detector
//! behind that fiber. These closed forms are what the Monte Carlo sampler
//! is checked against.
//!
//! Run with: `cargo run --example channel_models`

use hydroqkd::channel::{detection_rate, error_model, DetectorModel, FiberLink};
use hydroqkd::finitekey::format_sig6;

fn main() {
    let attenuation = 0.2; // dB/km, standard single-mode fiber at 1550 nm

    println!("fiber loss (alpha = {attenuation} dB/km)");
    println!("length_km  loss_db  transmittance");
    for &km in &[1.0, 10.0, 25.0, 50.0, 100.0] {
        let link = FiberLink::new(attenuation, km).expect("valid link");
        println!(
            "{km:>9}  {:>7}  {}",
            format_sig6(link.total_loss_db()),
            format_sig6(link.transmittance())
        );
    }

    // Detector: 25% efficiency, 1e-6 dark counts per gate, no afterpulsing.
    let det = DetectorModel::new(1e-6, 0.0, 0.25).expect("valid detector");
    let link = FiberLink::new(attenuation, 25.0).expect("valid link");
    let eta = link.transmittance() * det.efficiency;
    let e_mis = 0.01; // sin^2 of a ~5.7 degree misalignment

    println!();
    println!("detector response at 25 km (eta = {})", format_sig6(eta));
    println!("intensity  detection_rate  error_rate");
    for &(name, k) in &[("signal", 0.5), ("decoy", 0.1), ("vacuum", 0.002)] {
        let d = detection_rate(k, eta, &det);
        let e = error_model(k, eta, &det, e_mis).expect("valid misalignment");
        println!("{name:>9}  {:>14}  {}", format_sig6(d), format_sig6(e));
    }

    // The vacuum class still clicks at the dark-count floor: that is the
    // signal the decoy analysis uses to bound the zero-photon yield.
    let vacuum = detection_rate(0.002, eta, &det);
    let floor = detection_rate(0.0, eta, &det);
    println!();
    println!(
        "vacuum detection {} vs pure dark-count floor {}",
        format_sig6(vacuum),
        format_sig6(floor)
    );
}
