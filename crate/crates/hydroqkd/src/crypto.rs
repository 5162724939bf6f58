//! Consumption of distilled QKD keys: one-time-pad encryption, an
//! information-theoretic polynomial-hash MAC with nonce freshness, the
//! OTP-vs-authentication budget planner, and a use-once `KeyStore` whose
//! append-only ledger makes key reuse mechanically impossible.
//!
//! Key bits are consumed strictly in order. Every allocation appends a
//! `(purpose, start_bit, end_bit, timestamp)` ledger entry where the
//! timestamp is a logical counter, so identical operation sequences
//! produce identical ledgers.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::bitops::{BitError, BitString};

pub const TAG_BITS: usize = 64;
pub const NONCE_BITS: usize = 64;

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("key store exhausted: {requested} bits requested, {remaining} unconsumed")]
    Exhausted { requested: usize, remaining: usize },
    #[error("nonce {0} already used in this session")]
    NonceReused(String),
    #[error("nonce must be {NONCE_BITS} bits, got {0}")]
    BadNonceWidth(usize),
    #[error("ledger conflict: {0}")]
    LedgerConflict(String),
    #[error("malformed ledger line {line}: {reason}")]
    MalformedLedger { line: usize, reason: String },
    #[error(transparent)]
    Bit(#[from] BitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One allocation of key material; `end_bit` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub purpose: String,
    pub start_bit: usize,
    pub end_bit: usize,
    pub timestamp: u64,
}

/// Ordered secret-key material with strictly sequential, ledgered,
/// never-repeated allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyStore {
    bits: BitString,
    block_lengths: Vec<usize>,
    consumed_offset: usize,
    ledger: Vec<LedgerEntry>,
}

impl KeyStore {
    pub fn new(block: BitString) -> Self {
        let mut store = KeyStore {
            bits: BitString::new(),
            block_lengths: Vec::new(),
            consumed_offset: 0,
            ledger: Vec::new(),
        };
        if !block.is_empty() {
            store.append_block(block);
        }
        store
    }

    pub fn empty() -> Self {
        KeyStore::new(BitString::new())
    }

    /// Appends fresh key material (one file line per block).
    pub fn append_block(&mut self, block: BitString) {
        self.block_lengths.push(block.len());
        self.bits.extend(&block);
    }

    pub fn total_bits(&self) -> usize {
        self.bits.len()
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.consumed_offset
    }

    pub fn consumed_offset(&self) -> usize {
        self.consumed_offset
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    /// Consumes the next `n_bits` bits for `purpose`, appending a ledger
    /// entry. Fails atomically on exhaustion (store untouched). A
    /// zero-bit request returns an empty string without touching the
    /// store or the ledger.
    pub fn allocate(&mut self, purpose: &str, n_bits: usize) -> Result<BitString, CryptoError> {
        if n_bits == 0 {
            return Ok(BitString::new());
        }
        if n_bits > self.remaining() {
            return Err(CryptoError::Exhausted {
                requested: n_bits,
                remaining: self.remaining(),
            });
        }
        let start = self.consumed_offset;
        let end = start + n_bits;
        let bits = self.bits.slice(start, end);
        self.consumed_offset = end;
        let timestamp = self.ledger.iter().map(|e| e.timestamp).max().map_or(1, |t| t + 1);
        self.ledger.push(LedgerEntry {
            purpose: purpose.to_string(),
            start_bit: start,
            end_bit: end,
            timestamp,
        });
        Ok(bits)
    }

    /// Reads (without consuming) the bits a ledger entry covers.
    pub fn bits_for(&self, entry: &LedgerEntry) -> Option<BitString> {
        if entry.start_bit <= entry.end_bit && entry.end_bit <= self.bits.len() {
            Some(self.bits.slice(entry.start_bit, entry.end_bit))
        } else {
            None
        }
    }

    /// Loads a store from a key file (lowercase hex, one block per line)
    /// and its ledger file; a missing ledger file means an untouched
    /// store.
    pub fn from_files(key_path: &Path, ledger_path: &Path) -> Result<Self, CryptoError> {
        let mut store = KeyStore::empty();
        let key_text = fs::read_to_string(key_path)?;
        for line in key_text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            store.append_block(BitString::from_hex(line)?);
        }
        if !ledger_path.exists() {
            return Ok(store);
        }
        let ledger_text = fs::read_to_string(ledger_path)?;
        let mut prev_end = 0usize;
        for (idx, line) in ledger_text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(CryptoError::MalformedLedger {
                    line: idx + 1,
                    reason: format!("expected 4 comma-separated fields, got {}", parts.len()),
                });
            }
            let field = |i: usize| -> Result<usize, CryptoError> {
                parts[i].parse().map_err(|_| CryptoError::MalformedLedger {
                    line: idx + 1,
                    reason: format!("field {} is not an integer: {}", i + 1, parts[i]),
                })
            };
            let entry = LedgerEntry {
                purpose: parts[0].to_string(),
                start_bit: field(1)?,
                end_bit: field(2)?,
                timestamp: field(3)? as u64,
            };
            if entry.end_bit < entry.start_bit {
                return Err(CryptoError::LedgerConflict(format!(
                    "line {}: range {}..{} is reversed",
                    idx + 1,
                    entry.start_bit,
                    entry.end_bit
                )));
            }
            if entry.start_bit < prev_end {
                return Err(CryptoError::LedgerConflict(format!(
                    "line {}: range {}..{} overlaps consumed bits 0..{}",
                    idx + 1,
                    entry.start_bit,
                    entry.end_bit,
                    prev_end
                )));
            }
            if entry.end_bit > store.total_bits() {
                return Err(CryptoError::LedgerConflict(format!(
                    "line {}: range {}..{} exceeds the {}-bit store",
                    idx + 1,
                    entry.start_bit,
                    entry.end_bit,
                    store.total_bits()
                )));
            }
            prev_end = entry.end_bit;
            store.ledger.push(entry);
        }
        store.consumed_offset = prev_end;
        Ok(store)
    }

    /// Writes the key material as lowercase hex, one block per line.
    /// Blocks must be nibble-aligned.
    pub fn write_key_file(&self, path: &Path) -> Result<(), CryptoError> {
        let mut out = String::new();
        let mut offset = 0;
        for &len in &self.block_lengths {
            let block = self.bits.slice(offset, offset + len);
            offset += len;
            out.push_str(&block.to_hex()?);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Writes the full ledger, one `purpose,start,end,timestamp` line
    /// per allocation in order (prior lines are never altered, so a
    /// rewrite is equivalent to appending the new entries).
    pub fn write_ledger_file(&self, path: &Path) -> Result<(), CryptoError> {
        let mut out = String::new();
        for e in &self.ledger {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.purpose, e.start_bit, e.end_bit, e.timestamp
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// XORs the message with freshly allocated key bits (purpose
/// `otp-encrypt`). An empty message leaves the store untouched.
pub fn otp_encrypt(
    message: &BitString,
    store: &mut KeyStore,
) -> Result<BitString, CryptoError> {
    if message.is_empty() {
        return Ok(BitString::new());
    }
    let key = store.allocate("otp-encrypt", message.len())?;
    Ok(message.xor(&key).expect("allocation length matches"))
}

/// Reapplies the XOR with the same key bits.
pub fn otp_decrypt(ciphertext: &BitString, key_bits: &BitString) -> Result<BitString, CryptoError> {
    Ok(ciphertext.xor(key_bits)?)
}

/// Payload with its freshness nonce and 64-bit information-theoretic tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthenticatedMessage {
    pub payload: BitString,
    pub nonce: BitString,
    pub tag: BitString,
}

/// Carry-less multiplication in GF(2^64) modulo x⁶⁴ + x⁴ + x³ + x + 1.
pub fn gf64_mul(a: u64, b: u64) -> u64 {
    let mut acc = 0u64;
    let mut shifted = a;
    for i in 0..64 {
        if (b >> i) & 1 == 1 {
            acc ^= shifted;
        }
        let carry = shifted >> 63;
        shifted <<= 1;
        if carry == 1 {
            shifted ^= 0x1B;
        }
    }
    acc
}

/// Polynomial-evaluation hash over GF(2^64): the message is split into
/// 64-bit blocks (MSB-first, zero-padded), a final block carries the bit
/// length, and the blocks are folded by Horner's rule in `key`.
pub fn poly_hash(message: &BitString, key: u64) -> u64 {
    let mut h = 0u64;
    let mut i = 0;
    while i < message.len() {
        let end = (i + 64).min(message.len());
        h = gf64_mul(h ^ bits_to_u64(&message.slice(i, end)), key);
        i = end;
    }
    gf64_mul(h ^ message.len() as u64, key)
}

/// Tag for a message under a session hash key, a one-time 64-bit mask,
/// and a nonce. Pure recomputation path shared by tagging and
/// verification.
pub fn compute_tag(message: &BitString, hash_key: u64, mask: u64, nonce: u64) -> u64 {
    poly_hash(message, hash_key) ^ mask ^ nonce
}

/// Checks an authenticated message against the session hash key and the
/// mask bits its tag consumed.
pub fn verify_tag(msg: &AuthenticatedMessage, hash_key: u64, mask: u64) -> bool {
    if msg.nonce.len() != NONCE_BITS || msg.tag.len() != TAG_BITS {
        return false;
    }
    let expect = compute_tag(&msg.payload, hash_key, mask, bits_to_u64(&msg.nonce));
    msg.tag == u64_from_tag(expect)
}

/// One authentication session: a store-allocated hash key reused across
/// messages, plus a nonce log that refuses repeats.
pub struct AuthSession {
    hash_key: u64,
    nonce_log: HashSet<u64>,
}

impl AuthSession {
    /// Allocates the session hash key (purpose `auth-hashkey`).
    pub fn new(store: &mut KeyStore) -> Result<Self, CryptoError> {
        let key_bits = store.allocate("auth-hashkey", TAG_BITS)?;
        Ok(AuthSession { hash_key: bits_to_u64(&key_bits), nonce_log: HashSet::new() })
    }

    pub fn hash_key(&self) -> u64 {
        self.hash_key
    }

    /// Tags a message, consuming a fresh 64-bit mask (purpose
    /// `auth-mask`). Refuses a nonce already seen this session; the
    /// nonce is only logged once the mask allocation succeeds, so a
    /// failed call leaves both the store and the log unchanged.
    pub fn tag(
        &mut self,
        message: &BitString,
        store: &mut KeyStore,
        nonce: &BitString,
    ) -> Result<AuthenticatedMessage, CryptoError> {
        if nonce.len() != NONCE_BITS {
            return Err(CryptoError::BadNonceWidth(nonce.len()));
        }
        let nonce_word = bits_to_u64(nonce);
        if self.nonce_log.contains(&nonce_word) {
            return Err(CryptoError::NonceReused(format!("{nonce_word:016x}")));
        }
        let mask = store.allocate("auth-mask", TAG_BITS)?;
        self.nonce_log.insert(nonce_word);
        let tag = compute_tag(message, self.hash_key, bits_to_u64(&mask), nonce_word);
        Ok(AuthenticatedMessage {
            payload: message.clone(),
            nonce: nonce.clone(),
            tag: u64_from_tag(tag),
        })
    }
}

/// Operating mode the key budget supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Otp,
    AuthOnly,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Otp => "OTP",
            Mode::AuthOnly => "AUTH_ONLY",
        }
    }
}

/// One-time-pad everything only when the key rate strictly exceeds the
/// classical bandwidth; at equality (or below) keys are reserved for
/// authentication.
pub fn plan_mode(skr_bps: f64, required_bandwidth_bps: f64) -> Mode {
    if skr_bps > required_bandwidth_bps {
        Mode::Otp
    } else {
        Mode::AuthOnly
    }
}

/// MSB-first interpretation of up to 64 bits (shorter inputs occupy the
/// high bits).
pub fn bits_to_u64(bits: &BitString) -> u64 {
    let mut v = 0u64;
    for (i, b) in bits.iter().take(64).enumerate() {
        v |= (b as u64) << (63 - i);
    }
    v
}

fn u64_from_tag(v: u64) -> BitString {
    let mut out = BitString::new();
    for i in (0..64).rev() {
        out.push(((v >> i) & 1) as u8);
    }
    out
}
