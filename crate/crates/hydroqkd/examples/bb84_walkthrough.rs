//! A hand-traceable BB84 round over a dozen pulses.
//!
//! Alice picks a random bit and basis per pulse and prepares the matching
//! polarization state. Bob measures in his own random basis; a mismatched
//! basis gives him a coin flip. Sifting keeps only the positions where the
//! bases agreed. With a noiseless channel the sifted strings are identical.
//!
//! Run with: `cargo run --example bb84_walkthrough`

use hydroqkd::bitops::BitString;
use hydroqkd::protocol::{measure, prepare, sift, Basis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 12;

    let mut alice_bits = BitString::new();
    let mut alice_bases = Vec::new();
    let mut bob_bits = BitString::new();
    let mut bob_bases = Vec::new();

    println!("pulse  alice bit  alice basis  state     bob basis  bob bit  kept");
    for i in 0..n {
        let bit = u8::from(rng.random_bool(0.5));
        let basis = if rng.random_bool(0.5) { Basis::X } else { Basis::Z };
        let state = prepare(bit, basis);

        let bob_basis = if rng.random_bool(0.5) { Basis::X } else { Basis::Z };
        // Noiseless link: flip probability 0, so only basis mismatch
        // randomizes the outcome.
        let outcome = measure(state, bob_basis, &mut rng, 0.0).expect("valid flip probability");

        let kept = if basis == bob_basis { "yes" } else { "-" };
        println!(
            "{i:>5}  {bit:>9}  {:>11}  {:<8}  {:>9}  {outcome:>7}  {kept:>4}",
            format!("{basis:?}"),
            format!("{state:?}"),
            format!("{bob_basis:?}")
        );

        alice_bits.push(bit);
        alice_bases.push(basis);
        bob_bits.push(outcome);
        bob_bases.push(bob_basis);
    }

    let (alice_sifted, bob_sifted) =
        sift(&alice_bases, &bob_bases, &bob_bits, &alice_bits).expect("equal lengths");

    println!();
    println!("alice sifted: {alice_sifted}");
    println!("bob sifted:   {bob_sifted}");
    assert_eq!(
        alice_sifted.bits(),
        bob_sifted.bits(),
        "noiseless sifted keys must agree"
    );
    println!(
        "sifted {} of {} pulses; keys agree on every kept position",
        alice_sifted.len(),
        n
    );
}
