use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Packed bit sequence with explicit length.
///
/// Bit `j` is stored in word `j / 64` at position `j % 64` (LSB first).
/// Unused bits of the final word are kept at zero, so equality on the
/// struct is bit-sequence equality.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitString {
    len: u64,
    words: Vec<u64>,
}

fn words_for(len: u64) -> usize {
    len.div_ceil(64) as usize
}

impl BitString {
    pub fn new() -> Self {
        BitString { len: 0, words: Vec::new() }
    }

    /// All-zero string of `len` bits.
    pub fn zeros(len: u64) -> Self {
        BitString { len, words: vec![0u64; words_for(len)] }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = BitString::zeros(bits.len() as u64);
        for (j, &b) in bits.iter().enumerate() {
            if b {
                s.words[j / 64] |= 1u64 << (j % 64);
            }
        }
        s
    }

    /// Construct from backing words; trailing bits beyond `len` must be zero.
    pub fn from_words(len: u64, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(len) {
            return Err(Error::domain(format!(
                "word count {} does not match {} bits",
                words.len(),
                len
            )));
        }
        let rem = (len % 64) as u32;
        if rem != 0 && words.last().is_some_and(|&w| w >> rem != 0) {
            return Err(Error::NonzeroPadding);
        }
        Ok(BitString { len, words })
    }

    /// Construct from packed octets (LSB-first within each octet).
    pub fn from_bytes(len: u64, bytes: &[u8]) -> Result<Self> {
        let nbytes = len.div_ceil(8) as usize;
        if bytes.len() != nbytes {
            return Err(Error::domain(format!(
                "byte count {} does not match {} bits",
                bytes.len(),
                len
            )));
        }
        let mut words = vec![0u64; words_for(len)];
        for (k, &b) in bytes.iter().enumerate() {
            words[k / 8] |= (b as u64) << (8 * (k % 8));
        }
        let rem = (len % 8) as u32;
        if rem != 0 && bytes.last().is_some_and(|&b| b >> rem != 0) {
            return Err(Error::NonzeroPadding);
        }
        Ok(BitString { len, words })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: u64) -> bool {
        debug_assert!(j < self.len);
        self.words[(j / 64) as usize] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: u64, value: bool) {
        debug_assert!(j < self.len);
        let (w, p) = ((j / 64) as usize, j % 64);
        if value {
            self.words[w] |= 1u64 << p;
        } else {
            self.words[w] &= !(1u64 << p);
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        let j = self.len;
        self.len += 1;
        if value {
            self.words[(j / 64) as usize] |= 1u64 << (j % 64);
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Word `w` (zero if past the end); handy for shifted reads.
    pub fn word_or_zero(&self, w: usize) -> u64 {
        self.words.get(w).copied().unwrap_or(0)
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Packed octet form (ceil(len/8) bytes).
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(nbytes);
        for k in 0..nbytes {
            out.push((self.words[k / 8] >> (8 * (k % 8))) as u8);
        }
        out
    }

    /// Zero any bits at positions >= len in the final word.
    pub(crate) fn mask_tail(&mut self) {
        let rem = (self.len % 64) as u32;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl Default for BitString {
    fn default() -> Self {
        BitString::new()
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString[{} bits]", self.len)?;
        if self.len <= 64 {
            write!(f, " ")?;
            for j in 0..self.len {
                write!(f, "{}", self.get(j) as u8)?;
            }
        }
        Ok(())
    }
}

/// XOR `data` with the prefix of `pad`. Applying twice restores `data`.
pub fn xor_pad(data: &BitString, pad: &BitString) -> Result<BitString> {
    if pad.len() < data.len() {
        return Err(Error::domain(format!(
            "pad length {} shorter than data length {}",
            pad.len(),
            data.len()
        )));
    }
    let mut out = data.clone();
    for (w, p) in out.words.iter_mut().zip(pad.words.iter()) {
        *w ^= p;
    }
    out.mask_tail();
    Ok(out)
}

/// Merge equal-length strings as a_1 b_1 a_2 b_2 ...
pub fn interleave(a: &BitString, b: &BitString) -> Result<BitString> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "interleave requires equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut out = BitString::zeros(2 * a.len());
    for j in 0..a.len() {
        if a.get(j) {
            out.set(2 * j, true);
        }
        if b.get(j) {
            out.set(2 * j + 1, true);
        }
    }
    Ok(out)
}

/// Inverse of [`interleave`]; input length must be even.
pub fn deinterleave(merged: &BitString) -> Result<(BitString, BitString)> {
    if !merged.len().is_multiple_of(2) {
        return Err(Error::domain("deinterleave requires even length"));
    }
    let n = merged.len() / 2;
    let mut a = BitString::zeros(n);
    let mut b = BitString::zeros(n);
    for j in 0..n {
        if merged.get(2 * j) {
            a.set(j, true);
        }
        if merged.get(2 * j + 1) {
            b.set(j, true);
        }
    }
    Ok((a, b))
}
