//! Bit-string carrier type, the 7-bit ASCII codec, XOR, and the binary
//! entropy function h(p) that the finite-key analysis leans on.
//!
//! Text form: `Display` emits contiguous `'0'`/`'1'` characters; parsing
//! additionally accepts spaces between groups (never emitted on output).

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BitError {
    #[error("character at position {position} has no 7-bit ASCII code (U+{code:04X})")]
    NonAscii { position: usize, code: u32 },
    #[error("bit-string length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("entropy argument {0} outside [0, 1]")]
    EntropyDomain(f64),
    #[error("invalid bit character {found:?} at position {position}")]
    BadBitChar { position: usize, found: char },
    #[error("bit count {0} is not a multiple of 7")]
    NotSevenAligned(usize),
    #[error("bit count {0} is not a multiple of 4")]
    NotNibbleAligned(usize),
    #[error("invalid hex character {found:?} at position {position}")]
    BadHexChar { position: usize, found: char },
}

/// Ordered sequence of bits; carrier for keys, messages, and ciphertexts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from a slice of 0/1 values. Panics on anything else, which
    /// keeps the "every element is 0 or 1" invariant unconditional.
    pub fn from_bits(bits: &[u8]) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bit values must be 0 or 1");
        Self { bits: bits.to_vec() }
    }

    pub fn push(&mut self, bit: u8) {
        assert!(bit <= 1, "bit values must be 0 or 1");
        self.bits.push(bit);
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, index: usize) -> u8 {
        self.bits[index]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    /// Sub-range copy, `start..end` in bit indices.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        Self { bits: self.bits[start..end].to_vec() }
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    /// Bitwise exclusive-or; both operands must share one length.
    pub fn xor(&self, other: &BitString) -> Result<BitString, BitError> {
        if self.len() != other.len() {
            return Err(BitError::LengthMismatch { left: self.len(), right: other.len() });
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect();
        Ok(Self { bits })
    }

    /// Lowercase hex, 4 bits per digit, most-significant bit first.
    pub fn to_hex(&self) -> Result<String, BitError> {
        if self.len() % 4 != 0 {
            return Err(BitError::NotNibbleAligned(self.len()));
        }
        let mut out = String::with_capacity(self.len() / 4);
        for nib in self.bits.chunks(4) {
            let v = nib[0] << 3 | nib[1] << 2 | nib[2] << 1 | nib[3];
            out.push(char::from_digit(v as u32, 16).unwrap());
        }
        Ok(out)
    }

    /// Parses hex digits (whitespace ignored) into bits, MSB first.
    pub fn from_hex(text: &str) -> Result<BitString, BitError> {
        let mut bits = Vec::with_capacity(text.len() * 4);
        for (position, ch) in text.chars().enumerate() {
            if ch.is_whitespace() {
                continue;
            }
            let v = ch
                .to_digit(16)
                .ok_or(BitError::BadHexChar { position, found: ch })? as u8;
            bits.extend_from_slice(&[v >> 3 & 1, v >> 2 & 1, v >> 1 & 1, v & 1]);
        }
        Ok(Self { bits })
    }

    /// `len` uniform bits drawn one per RNG word (the draw-per-bit
    /// contract keeps seeded streams reproducible across refactors).
    pub fn random(rng: &mut impl rand::RngCore, len: usize) -> BitString {
        let bits = (0..len).map(|_| (rng.next_u32() & 1) as u8).collect();
        Self { bits }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = BitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for (position, ch) in s.chars().enumerate() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                c if c.is_whitespace() => {}
                found => return Err(BitError::BadBitChar { position, found }),
            }
        }
        Ok(Self { bits })
    }
}

/// Encodes text as 7 bits per character, most-significant bit first,
/// concatenated in text order. Only code points ≤ 127 are accepted.
pub fn encode_ascii7(text: &str) -> Result<BitString, BitError> {
    let mut out = BitString::new();
    for (position, ch) in text.chars().enumerate() {
        let code = ch as u32;
        if code > 127 {
            return Err(BitError::NonAscii { position, code });
        }
        for shift in (0..7).rev() {
            out.push(((code >> shift) & 1) as u8);
        }
    }
    Ok(out)
}

/// Inverse of [`encode_ascii7`]: groups of 7 bits back to characters.
pub fn decode_ascii7(bits: &BitString) -> Result<String, BitError> {
    if bits.len() % 7 != 0 {
        return Err(BitError::NotSevenAligned(bits.len()));
    }
    let mut out = String::with_capacity(bits.len() / 7);
    for group in bits.bits().chunks(7) {
        let code = group.iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
        out.push(char::from_u32(code).expect("7-bit code is valid ASCII"));
    }
    Ok(out)
}

/// Binary entropy h(p) = −p·log2(p) − (1−p)·log2(1−p), with the
/// 0·log2(0) = 0 convention so the endpoints return exactly 0.
pub fn binary_entropy(p: f64) -> Result<f64, BitError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BitError::EntropyDomain(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}
