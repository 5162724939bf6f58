//! Classical post-processing: sampled QBER estimation, the abort
//! decision, Hamming(7,4) error correction with parity-leak accounting,
//! the 2-bit toy hash, and Toeplitz privacy amplification.
//!
//! The Hamming codeword layout places the parity bits at positions 1, 2
//! and 4 (1-based) with data spread as [p1 p2 d1 p3 d2 d4 d3]; this is
//! the one layout that reproduces both reference vectors
//! encode(1101) = 0010110 and decode(0010100) = (1101, position 6), and
//! it is frozen as the module convention.

use rand::Rng;
use thiserror::Error;

use crate::bitops::{binary_entropy, BitString};

#[derive(Debug, Error, PartialEq)]
pub enum PpError {
    #[error("sifted keys differ in length: alice {alice}, bob {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("cannot estimate QBER on an empty pair")]
    EmptyPair,
    #[error("sample fraction {0} outside (0, 1]")]
    BadSampleFraction(f64),
    #[error("block must be exactly {expected} bits, got {got}")]
    WrongBlockLength { expected: usize, got: usize },
    #[error("pair hash needs an even-length input, got {0} bits")]
    OddLength(usize),
    #[error("amplification target {target} bits outside 1..={available}")]
    BadTarget { target: usize, available: usize },
    #[error("hash seed must be {expected} bits, got {got}")]
    BadSeedLength { expected: usize, got: usize },
}

/// Alice's and Bob's sifted keys, index-aligned and equal-length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftedKeyPair {
    pub alice: BitString,
    pub bob: BitString,
}

impl SiftedKeyPair {
    pub fn new(alice: BitString, bob: BitString) -> Result<Self, PpError> {
        if alice.len() != bob.len() {
            return Err(PpError::LengthMismatch { alice: alice.len(), bob: bob.len() });
        }
        Ok(SiftedKeyPair { alice, bob })
    }

    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }

    /// Fraction of positions where the two keys disagree.
    pub fn mismatch_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let errs = self
            .alice
            .iter()
            .zip(self.bob.iter())
            .filter(|(a, b)| a != b)
            .count();
        errs as f64 / self.len() as f64
    }
}

/// Distilled secret key with the security budget it was extracted under.
#[derive(Debug, Clone, PartialEq)]
pub struct SecureKey {
    pub bits: BitString,
    pub epsilon_sec: f64,
    pub provenance: String,
}

/// Discloses a random `ceil(fraction · len)`-bit sample, returning the
/// observed error rate and the undisclosed remainder of the pair.
pub fn estimate_qber(
    pair: &SiftedKeyPair,
    sample_fraction: f64,
    rng: &mut impl Rng,
) -> Result<(f64, SiftedKeyPair), PpError> {
    if pair.is_empty() {
        return Err(PpError::EmptyPair);
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(PpError::BadSampleFraction(sample_fraction));
    }
    let len = pair.len();
    let amount = ((sample_fraction * len as f64).ceil() as usize).clamp(1, len);
    let mut picks = rand::seq::index::sample(rng, len, amount).into_vec();
    picks.sort_unstable();

    let mut mismatches = 0usize;
    let mut keep_a = BitString::new();
    let mut keep_b = BitString::new();
    let mut next_pick = picks.iter().copied().peekable();
    for i in 0..len {
        let (a, b) = (pair.alice.bit(i), pair.bob.bit(i));
        if next_pick.peek() == Some(&i) {
            next_pick.next();
            if a != b {
                mismatches += 1;
            }
        } else {
            keep_a.push(a);
            keep_b.push(b);
        }
    }
    let qber = mismatches as f64 / amount as f64;
    Ok((qber, SiftedKeyPair { alice: keep_a, bob: keep_b }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Abort,
}

/// Abort iff the observed QBER strictly exceeds the threshold; a QBER
/// exactly at the threshold passes.
pub fn abort_check(qber: f64, threshold: f64) -> Verdict {
    if qber > threshold {
        Verdict::Abort
    } else {
        Verdict::Pass
    }
}

/// Encodes 4 data bits into the 7-bit codeword [p1 p2 d1 p3 d2 d4 d3].
pub fn hamming74_encode(data: &BitString) -> Result<BitString, PpError> {
    if data.len() != 4 {
        return Err(PpError::WrongBlockLength { expected: 4, got: data.len() });
    }
    let d = data.bits();
    let mut w = [0u8; 7];
    w[2] = d[0];
    w[4] = d[1];
    w[6] = d[2];
    w[5] = d[3];
    w[0] = w[2] ^ w[4] ^ w[6];
    w[1] = w[2] ^ w[5] ^ w[6];
    w[3] = w[4] ^ w[5] ^ w[6];
    Ok(BitString::from_bits(&w))
}

/// Decodes a 7-bit word, correcting at most one flipped bit; returns the
/// data bits and the (1-based) corrected position, if any.
pub fn hamming74_decode(word: &BitString) -> Result<(BitString, Option<usize>), PpError> {
    if word.len() != 7 {
        return Err(PpError::WrongBlockLength { expected: 7, got: word.len() });
    }
    let mut w: [u8; 7] = word.bits().try_into().expect("length checked");
    let c1 = w[0] ^ w[2] ^ w[4] ^ w[6];
    let c2 = w[1] ^ w[2] ^ w[5] ^ w[6];
    let c4 = w[3] ^ w[4] ^ w[5] ^ w[6];
    let position = (4 * c4 + 2 * c2 + c1) as usize;
    if position != 0 {
        w[position - 1] ^= 1;
    }
    let data = BitString::from_bits(&[w[2], w[4], w[6], w[5]]);
    Ok((data, (position != 0).then_some(position)))
}

/// Block-wise Hamming(7,4) reconciliation: Alice sends 3 parity bits per
/// 4-bit block (counted as leaked), Bob decodes his block against them.
/// A trailing partial block is disclosed and discarded. Blocks holding
/// two or more errors may retain a residual mismatch.
pub fn correct_errors(pair: &SiftedKeyPair) -> (SiftedKeyPair, u64) {
    let blocks = pair.len() / 4;
    let mut alice = BitString::new();
    let mut bob = BitString::new();
    for i in 0..blocks {
        let a_block = pair.alice.slice(4 * i, 4 * i + 4);
        let code = hamming74_encode(&a_block).expect("4-bit block");
        let b = pair.bob.slice(4 * i, 4 * i + 4);
        let word = BitString::from_bits(&[
            code.bit(0),
            code.bit(1),
            b.bit(0),
            code.bit(3),
            b.bit(1),
            b.bit(3),
            b.bit(2),
        ]);
        let (decoded, _) = hamming74_decode(&word).expect("7-bit word");
        alice.extend(&a_block);
        bob.extend(&decoded);
    }
    (SiftedKeyPair { alice, bob }, 3 * blocks as u64)
}

/// Toy compression for walkthroughs: each adjacent 2-bit group maps
/// 00→0, 01→1, 10→1, 11→0 (the XOR of the pair).
pub fn pair_hash(key: &BitString) -> Result<BitString, PpError> {
    if key.len() % 2 != 0 {
        return Err(PpError::OddLength(key.len()));
    }
    let mut out = BitString::new();
    for i in 0..key.len() / 2 {
        out.push(key.bit(2 * i) ^ key.bit(2 * i + 1));
    }
    Ok(out)
}

/// Binary Toeplitz-matrix privacy amplification. The matrix for an
/// n-bit key and t-bit output is defined by an (n+t−1)-bit seed via
/// T[i][j] = seed[i − j + n − 1]; the output is T·key over GF(2).
pub fn privacy_amplify(
    key: &BitString,
    target_length: usize,
    hash_seed: &BitString,
    epsilon_sec: f64,
    provenance: &str,
) -> Result<SecureKey, PpError> {
    let n = key.len();
    if target_length == 0 || target_length > n {
        return Err(PpError::BadTarget { target: target_length, available: n });
    }
    let expected = n + target_length - 1;
    if hash_seed.len() != expected {
        return Err(PpError::BadSeedLength { expected, got: hash_seed.len() });
    }

    // out[i] = ⊕_j key[j]·seed[i−j+n−1]. With srev the reversed seed this
    // is a dot product against the window srev[(t−1−i)..(t−1−i)+n], which
    // packs into u64 words for an O(n·t/64) product.
    let key_words = pack_bits(key.bits());
    let mut srev: Vec<u8> = hash_seed.bits().to_vec();
    srev.reverse();
    let srev_words = pack_bits(&srev);
    let mut out = BitString::new();
    for i in 0..target_length {
        let offset = target_length - 1 - i;
        out.push(window_parity(&srev_words, offset, &key_words, n));
    }
    Ok(SecureKey { bits: out, epsilon_sec, provenance: provenance.to_string() })
}

fn pack_bits(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (j, &b) in bits.iter().enumerate() {
        words[j >> 6] |= (b as u64) << (j & 63);
    }
    words
}

/// Parity of Σ_j key[j]·window[offset+j] over packed words.
fn window_parity(window: &[u64], offset: usize, key: &[u64], nbits: usize) -> u8 {
    let word_shift = offset >> 6;
    let bit_shift = offset & 63;
    let words = nbits.div_ceil(64);
    let mut acc = 0u64;
    for w in 0..words {
        let lo = window.get(word_shift + w).copied().unwrap_or(0) >> bit_shift;
        let hi = if bit_shift == 0 {
            0
        } else {
            window.get(word_shift + w + 1).copied().unwrap_or(0) << (64 - bit_shift)
        };
        acc ^= key[w] & (lo | hi);
    }
    (acc.count_ones() & 1) as u8
}

/// Analytic error-correction leakage: ceil(f · n · h(qber)), with the
/// QBER clamped into [0, 1/2]. Direct parity counts from
/// `correct_errors` take precedence when a simulated run provides them.
pub fn leak_accounting(n_bits: f64, qber: f64, efficiency_f: f64) -> f64 {
    if n_bits <= 0.0 {
        return 0.0;
    }
    let h = binary_entropy(qber.clamp(0.0, 0.5)).expect("clamped into domain");
    (efficiency_f * n_bits * h).ceil()
}
