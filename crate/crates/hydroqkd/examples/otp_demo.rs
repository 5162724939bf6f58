//! One-time pad with strict key accounting.
//!
//! Encrypts a short message with pad bits drawn from a key store, shows the
//! ledger entry the draw leaves behind, decrypts, and then demonstrates the
//! two hard guarantees: key bits are never reissued, and the store refuses
//! (atomically) once the pad runs out.
//!
//! Run with: `cargo run --example otp_demo`

use hydroqkd::bitops::{decode_ascii7, encode_ascii7, BitString};
use hydroqkd::crypto::{otp_decrypt, otp_encrypt, CryptoError, KeyStore};

fn main() {
    // 42 bits of key material: enough for exactly two 3-character messages.
    let pad: BitString = "110101110010111100100101001000110100011101"
        .parse()
        .expect("valid bit literal");
    let mut store = KeyStore::new(pad);
    println!("key store holds {} bits", store.total_bits());

    let message = encode_ascii7("dam").expect("ascii message");
    println!("plaintext bits:  {message}");

    let ciphertext = otp_encrypt(&message, &mut store).expect("enough key");
    println!("ciphertext bits: {ciphertext}");
    println!("remaining key:   {} bits", store.remaining());
    for entry in store.ledger() {
        println!(
            "ledger: {} [{}, {}) at t={}",
            entry.purpose, entry.start_bit, entry.end_bit, entry.timestamp
        );
    }

    // Decryption reuses the ledger-recorded bits, not a fresh allocation.
    let used = store.bits_for(&store.ledger()[0]).expect("range in store");
    let recovered = otp_decrypt(&ciphertext, &used).expect("lengths match");
    println!("decrypted:       {}", decode_ascii7(&recovered).expect("ascii"));

    // A second message consumes the second half of the pad...
    let second = otp_encrypt(&encode_ascii7("ok!").expect("ascii"), &mut store)
        .expect("enough key");
    println!("second ciphertext: {second}");
    println!("remaining key:     {} bits", store.remaining());

    // ...and the third fails cleanly, leaving the store untouched.
    let before = store.remaining();
    match otp_encrypt(&message, &mut store) {
        Err(CryptoError::Exhausted { requested, remaining }) => {
            println!("third message refused: wanted {requested}, only {remaining} left");
        }
        other => panic!("expected exhaustion, got {other:?}"),
    }
    assert_eq!(store.remaining(), before, "failed draw must not consume key");
    println!("store unchanged after refusal: {} bits remain", store.remaining());
}
