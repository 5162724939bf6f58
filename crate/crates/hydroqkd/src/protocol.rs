//! BB84 prepare-and-measure primitives and basis sifting.
//!
//! Randomness contract: every stochastic draw consumes from the caller's
//! generator in a documented order, so a fixed seed replays a session
//! bit for bit. `measure` draws exactly one uniform bit on a basis
//! mismatch, and exactly one probability draw on a match when
//! `flip_probability > 0` (none when it is zero).

use std::fmt;

use rand::RngCore;
use thiserror::Error;

use crate::bitops::BitString;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("sequence lengths differ: alice bases {alice_bases}, bob bases {bob_bases}, bob bits {bob_bits}, alice bits {alice_bits}")]
    LengthMismatch { alice_bases: usize, bob_bases: usize, bob_bits: usize, alice_bits: usize },
    #[error("flip probability {0} outside [0, 1]")]
    BadFlipProbability(f64),
}

/// Measurement basis: Z rectilinear, X diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => write!(f, "Z"),
            Basis::X => write!(f, "X"),
        }
    }
}

/// The four BB84 polarization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarizationState {
    Ket0,
    Ket1,
    KetPlus,
    KetMinus,
}

impl PolarizationState {
    pub fn basis(&self) -> Basis {
        match self {
            PolarizationState::Ket0 | PolarizationState::Ket1 => Basis::Z,
            PolarizationState::KetPlus | PolarizationState::KetMinus => Basis::X,
        }
    }

    /// The bit this state encodes in its own basis.
    pub fn bit(&self) -> u8 {
        match self {
            PolarizationState::Ket0 | PolarizationState::KetPlus => 0,
            PolarizationState::Ket1 | PolarizationState::KetMinus => 1,
        }
    }
}

impl fmt::Display for PolarizationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            PolarizationState::Ket0 => "|0⟩",
            PolarizationState::Ket1 => "|1⟩",
            PolarizationState::KetPlus => "|+⟩",
            PolarizationState::KetMinus => "|−⟩",
        };
        write!(f, "{label}")
    }
}

/// Pulse intensity class of the decoy-state method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntensityClass {
    /// Signal pulses, mean photon number μ.
    Signal,
    /// Decoy pulses, mean photon number ν1.
    Decoy,
    /// Vacuum (or near-vacuum) pulses, mean photon number ν2.
    Vacuum,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 3] =
        [IntensityClass::Signal, IntensityClass::Decoy, IntensityClass::Vacuum];

    pub fn index(&self) -> usize {
        match self {
            IntensityClass::Signal => 0,
            IntensityClass::Decoy => 1,
            IntensityClass::Vacuum => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IntensityClass::Signal => "signal",
            IntensityClass::Decoy => "decoy",
            IntensityClass::Vacuum => "vacuum",
        }
    }
}

/// One prepared pulse: encoded bit, preparation basis, intensity tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseDescriptor {
    pub bit: u8,
    pub basis: Basis,
    pub intensity_class: IntensityClass,
}

/// Alice's state preparation. The mapping is fixed so that (1,Z)→|1⟩,
/// (0,Z)→|0⟩, (1,X)→|−⟩, (0,X)→|+⟩.
pub fn prepare(bit: u8, basis: Basis) -> PolarizationState {
    debug_assert!(bit <= 1);
    match (bit, basis) {
        (0, Basis::Z) => PolarizationState::Ket0,
        (1, Basis::Z) => PolarizationState::Ket1,
        (0, Basis::X) => PolarizationState::KetPlus,
        (_, Basis::X) => PolarizationState::KetMinus,
        (_, Basis::Z) => PolarizationState::Ket1,
    }
}

/// One uniform bit from the generator's next word.
pub(crate) fn draw_bit(rng: &mut dyn RngCore) -> u8 {
    (rng.next_u32() & 1) as u8
}

/// One uniform draw in [0, 1) built from 53 high bits of the next word.
pub(crate) fn draw_prob(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bob's measurement. A matching basis returns the encoded bit, flipped
/// with `flip_probability` (the channel error injection); a mismatched
/// basis yields a uniformly random bit.
pub fn measure(
    state: PolarizationState,
    basis: Basis,
    rng: &mut dyn RngCore,
    flip_probability: f64,
) -> Result<u8, ProtocolError> {
    if !(0.0..=1.0).contains(&flip_probability) {
        return Err(ProtocolError::BadFlipProbability(flip_probability));
    }
    if state.basis() == basis {
        let mut bit = state.bit();
        if flip_probability > 0.0 && draw_prob(rng) < flip_probability {
            bit ^= 1;
        }
        Ok(bit)
    } else {
        Ok(draw_bit(rng))
    }
}

/// Basis discussion: keeps exactly the positions where the bases match,
/// order preserved, returning (alice sifted, bob sifted).
pub fn sift(
    alice_bases: &[Basis],
    bob_bases: &[Basis],
    bob_bits: &BitString,
    alice_bits: &BitString,
) -> Result<(BitString, BitString), ProtocolError> {
    let n = alice_bases.len();
    if bob_bases.len() != n || bob_bits.len() != n || alice_bits.len() != n {
        return Err(ProtocolError::LengthMismatch {
            alice_bases: n,
            bob_bases: bob_bases.len(),
            bob_bits: bob_bits.len(),
            alice_bits: alice_bits.len(),
        });
    }
    let mut alice_sifted = BitString::new();
    let mut bob_sifted = BitString::new();
    for i in 0..n {
        if alice_bases[i] == bob_bases[i] {
            alice_sifted.push(alice_bits.bit(i));
            bob_sifted.push(bob_bits.bit(i));
        }
    }
    Ok((alice_sifted, bob_sifted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Deterministic generator feeding back a fixed word forever.
    struct ConstWords(u64);

    impl RngCore for ConstWords {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(self.0 as u8);
        }
    }

    #[test]
    fn prepare_matches_walkthrough_mapping() {
        assert_eq!(prepare(1, Basis::Z), PolarizationState::Ket1);
        assert_eq!(prepare(0, Basis::Z), PolarizationState::Ket0);
        assert_eq!(prepare(1, Basis::X), PolarizationState::KetMinus);
        assert_eq!(prepare(0, Basis::X), PolarizationState::KetPlus);
    }

    #[test]
    fn measure_identity_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for bit in [0u8, 1] {
            for basis in [Basis::Z, Basis::X] {
                let state = prepare(bit, basis);
                assert_eq!(measure(state, basis, &mut rng, 0.0).unwrap(), bit);
            }
        }
    }

    #[test]
    fn measure_forced_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(measure(PolarizationState::Ket0, Basis::Z, &mut rng, 1.0).unwrap(), 1);
    }

    #[test]
    fn measure_mismatch_uses_one_uniform_bit() {
        let mut zeros = ConstWords(0);
        assert_eq!(measure(PolarizationState::KetMinus, Basis::Z, &mut zeros, 0.0).unwrap(), 0);
        let mut ones = ConstWords(u64::MAX);
        assert_eq!(measure(PolarizationState::KetMinus, Basis::Z, &mut ones, 0.0).unwrap(), 1);
    }

    #[test]
    fn measure_mismatch_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let ones: u32 = (0..n)
            .map(|_| measure(PolarizationState::KetPlus, Basis::Z, &mut rng, 0.0).unwrap() as u32)
            .sum();
        // 5σ binomial window around n/2
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones as f64 - n as f64 / 2.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn measure_rejects_bad_flip_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(measure(PolarizationState::Ket0, Basis::Z, &mut rng, 1.5).is_err());
    }

    #[test]
    fn sift_walkthrough_keeps_matching_positions() {
        let alice_bases = [Basis::Z, Basis::X, Basis::Z];
        let bob_bases = [Basis::Z, Basis::Z, Basis::Z];
        let bob_bits: BitString = "100".parse().unwrap();
        let alice_bits: BitString = "110".parse().unwrap();
        let (alice_sifted, bob_sifted) =
            sift(&alice_bases, &bob_bases, &bob_bits, &alice_bits).unwrap();
        assert_eq!(bob_sifted.to_string(), "10");
        assert_eq!(alice_sifted.to_string(), "10");
    }

    #[test]
    fn sift_all_match_and_none_match() {
        let bits: BitString = "1011".parse().unwrap();
        let z4 = [Basis::Z; 4];
        let x4 = [Basis::X; 4];
        let (a, b) = sift(&z4, &z4, &bits, &bits).unwrap();
        assert_eq!((a.clone(), b.clone()), (bits.clone(), bits.clone()));
        let (a, b) = sift(&z4, &x4, &bits, &bits).unwrap();
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn sift_rejects_ragged_inputs() {
        let bits: BitString = "10".parse().unwrap();
        let err = sift(&[Basis::Z, Basis::X], &[Basis::Z], &bits, &bits).unwrap_err();
        assert!(matches!(err, ProtocolError::LengthMismatch { .. }));
    }

    #[test]
    fn sifted_fraction_near_one_half_with_uniform_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut alice_bases = Vec::with_capacity(n);
        let mut bob_bases = Vec::with_capacity(n);
        let mut alice_bits = BitString::new();
        let mut bob_bits = BitString::new();
        for _ in 0..n {
            let ab = if draw_bit(&mut rng) == 0 { Basis::Z } else { Basis::X };
            let bit = draw_bit(&mut rng);
            let bb = if draw_bit(&mut rng) == 0 { Basis::Z } else { Basis::X };
            let state = prepare(bit, ab);
            let measured = measure(state, bb, &mut rng, 0.0).unwrap();
            alice_bases.push(ab);
            bob_bases.push(bb);
            alice_bits.push(bit);
            bob_bits.push(measured);
        }
        let (alice_sifted, bob_sifted) =
            sift(&alice_bases, &bob_bases, &bob_bits, &alice_bits).unwrap();
        assert_eq!(alice_sifted, bob_sifted); // no noise, matched bases agree
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((alice_sifted.len() as f64 - n as f64 / 2.0).abs() < 5.0 * sigma);
    }
}
