//! Packed bit strings and Toeplitz hashing over GF(2).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Bit string packed little-endian into u64 words; bits past `len` are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut b = Bits { words: (0..len.div_ceil(64)).map(|_| rng.gen()).collect(), len };
        b.mask_tail();
        b
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Bits::zeros(bits.len());
        for (k, &x) in bits.iter().enumerate() {
            b.set(k, x);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, k: usize) -> bool {
        (self.words[k / 64] >> (k % 64)) & 1 == 1
    }

    pub fn set(&mut self, k: usize, x: bool) {
        let m = 1u64 << (k % 64);
        if x {
            self.words[k / 64] |= m;
        } else {
            self.words[k / 64] &= !m;
        }
    }

    pub fn flip(&mut self, k: usize) {
        self.words[k / 64] ^= 1u64 << (k % 64);
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        Bits { words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(), len: self.len }
    }

    /// Bits `start..start + len` as a new string.
    pub fn slice(&self, start: usize, len: usize) -> Bits {
        let mut out = Bits { words: (0..len.div_ceil(64)).map(|w| self.window_word(start + 64 * w)).collect(), len };
        out.mask_tail();
        out
    }

    /// Parity of ⟨self[offset..offset + x.len()], x⟩.
    fn window_parity(&self, offset: usize, x: &Bits) -> bool {
        let mut acc = 0u64;
        for (w, &xw) in x.words.iter().enumerate() {
            acc ^= self.window_word(offset + 64 * w) & xw;
        }
        acc.count_ones() % 2 == 1
    }

    /// 64 bits starting at `pos`, zero-padded past the end.
    fn window_word(&self, pos: usize) -> u64 {
        let (q, r) = (pos / 64, pos % 64);
        let lo = self.words.get(q).copied().unwrap_or(0);
        if r == 0 {
            return lo;
        }
        let hi = self.words.get(q + 1).copied().unwrap_or(0);
        (lo >> r) | (hi << (64 - r))
    }

    fn mask_tail(&mut self) {
        if self.len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }
}

impl std::fmt::Display for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for k in 0..self.len {
            f.write_str(if self.get(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// y = T·x over GF(2) with T the out_len × m Toeplitz matrix
/// T[j][k] = d[k − j + out_len − 1], d the first m + out_len − 1 seed bits.
pub fn toeplitz_hash(input: &Bits, seed: &Bits, out_len: usize) -> Result<Bits, SimError> {
    if out_len == 0 {
        return Err(SimError::Config("hash output length must be at least 1".into()));
    }
    let need = input.len() + out_len - 1;
    if seed.len() < need {
        return Err(SimError::SeedTooShort { need, have: seed.len() });
    }
    Ok(toeplitz_apply(input, seed, out_len))
}

fn toeplitz_apply(input: &Bits, diag: &Bits, out_len: usize) -> Bits {
    let mut out = Bits::zeros(out_len);
    for j in 0..out_len {
        if diag.window_parity(out_len - 1 - j, input) {
            out.set(j, true);
        }
    }
    out
}

/// Two-universal extraction with seed length equal to the input length:
/// the modified Toeplitz matrix [T′ | I] with T′ an l × (m − l) Toeplitz
/// block on the first m − 1 seed bits. The last seed bit is unused.
pub fn toeplitz_extract(raw: &Bits, seed: &Bits, out_len: usize) -> Result<Bits, SimError> {
    let m = raw.len();
    if seed.len() != m {
        return Err(SimError::LengthMismatch { what: "extractor seed", expected: m, found: seed.len() });
    }
    if out_len > m {
        return Err(SimError::LengthMismatch { what: "extractor output", expected: m, found: out_len });
    }
    if out_len == 0 {
        return Ok(Bits::zeros(0));
    }
    let tail = raw.slice(m - out_len, out_len);
    if out_len == m {
        return Ok(tail);
    }
    let head = raw.slice(0, m - out_len);
    Ok(toeplitz_apply(&head, seed, out_len).xor(&tail))
}
