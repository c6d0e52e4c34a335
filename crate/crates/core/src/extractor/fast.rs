//! Quasi-linear extraction engine.
//!
//! The m outputs are m consecutive coefficients of the correlation
//! polynomial of x and y: with `Yr` the bit-reversal of y over N bits,
//! coefficient `N-1+i` of `X(t) * Yr(t)` equals `out[i]`. The product is
//! evaluated block-wise: inputs split into B-bit blocks, block pairs on the
//! diagonals that overlap the needed coefficient window are carryless-
//! multiplied and XORed into a window accumulator. Work is parallel over
//! block pairs; XOR accumulation makes the result schedule-independent.
//! Runtime is linear in N for fixed m (each of the N/B blocks joins O(m/B)
//! pairs), memory O(N) plus a window of O(m + B) bits.

use rayon::prelude::*;

use crate::bitstore::BitString;
use crate::error::{Error, Result};

use super::polymul::{poly_mul, scratch_len};
use super::ShiftExtractorSpec;

/// Shift a word array right by `s` bits (towards lower indices).
fn shift_right_words(words: &[u64], s: u64, out_len: usize) -> Vec<u64> {
    let ws = (s / 64) as usize;
    let bs = (s % 64) as u32;
    let mut out = vec![0u64; out_len];
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = words.get(i + ws).copied().unwrap_or(0) >> bs;
        let hi = if bs == 0 {
            0
        } else {
            words.get(i + ws + 1).copied().unwrap_or(0) << (64 - bs)
        };
        *slot = lo | hi;
    }
    out
}

/// Bit-reversal of `bits` over its own length.
fn reverse_bits(bits: &BitString) -> Vec<u64> {
    let w = bits.words().len();
    // reverse padded 64w-bit string, then shift out the padding
    let mut rev: Vec<u64> = bits.words().iter().rev().map(|x| x.reverse_bits()).collect();
    let pad = 64 * w as u64 - bits.len();
    if pad > 0 {
        rev = shift_right_words(&rev, pad, w);
    }
    rev
}

fn padded_block(words: &[u64], block: usize, block_words: usize) -> Vec<u64> {
    let lo = block * block_words;
    let mut out = vec![0u64; block_words];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = words.get(lo + i).copied().unwrap_or(0);
    }
    out
}

/// Default block size in words: scale with the output, power of two,
/// between 2^6 and 2^14 words (4 Kbit .. 1 Mbit).
fn default_block_words(spec: &ShiftExtractorSpec) -> usize {
    let m_words = spec.output_bits.div_ceil(64).max(1) as usize;
    m_words.next_power_of_two().clamp(64, 16_384)
}

pub fn extract_fast(
    spec: &ShiftExtractorSpec,
    x: &BitString,
    y: &BitString,
) -> Result<BitString> {
    extract_fast_with_block(spec, x, y, default_block_words(spec))
}

/// Extraction with an explicit block size (words). Block boundaries must
/// not affect the result; exposed so tests can prove that.
pub fn extract_fast_with_block(
    spec: &ShiftExtractorSpec,
    x: &BitString,
    y: &BitString,
    block_words: usize,
) -> Result<BitString> {
    spec.validate()?;
    if x.len() != spec.input_bits || y.len() != spec.input_bits {
        return Err(Error::domain(format!(
            "input lengths {} and {} do not match spec N = {}",
            x.len(),
            y.len(),
            spec.input_bits
        )));
    }
    if block_words == 0 {
        return Err(Error::domain("block size must be positive"));
    }
    let n = spec.input_bits;
    let m = spec.output_bits;
    let input_words = x.words().len();
    let bw = block_words;
    let nblocks = input_words.div_ceil(bw);

    let y_rev = reverse_bits(y);

    // needed product words: bits [n-1, n-1+m)
    let w_lo = ((n - 1) / 64) as usize;
    let w_hi = (n - 1 + m).div_ceil(64) as usize;
    // diagonals d = u + v whose 2*bw-word product overlaps [w_lo, w_hi)
    let d_min = (w_lo + 1).saturating_sub(2 * bw) / bw
        + usize::from(!(w_lo + 1).saturating_sub(2 * bw).is_multiple_of(bw));
    let d_max = ((w_hi - 1) / bw).min(2 * (nblocks - 1));

    // accumulator covers words [acc_lo, acc_hi)
    let acc_lo = d_min * bw;
    let acc_hi = d_max * bw + 2 * bw;
    let acc_len = acc_hi - acc_lo;

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for d in d_min..=d_max {
        for u in d.saturating_sub(nblocks - 1)..=d.min(nblocks - 1) {
            pairs.push((u, d - u));
        }
    }

    struct Workspace {
        acc: Vec<u64>,
        prod: Vec<u64>,
        scratch: Vec<u64>,
    }

    let acc = pairs
        .par_iter()
        .fold(
            || Workspace {
                acc: vec![0u64; acc_len],
                prod: vec![0u64; 2 * bw],
                scratch: vec![0u64; scratch_len(bw)],
            },
            |mut ws, &(u, v)| {
                let xb = padded_block(x.words(), u, bw);
                let yb = padded_block(&y_rev, v, bw);
                poly_mul(&xb, &yb, &mut ws.prod, &mut ws.scratch);
                let offset = (u + v) * bw;
                for (i, &p) in ws.prod.iter().enumerate() {
                    let w = offset + i;
                    if w >= acc_lo && w < acc_hi {
                        ws.acc[w - acc_lo] ^= p;
                    }
                }
                ws
            },
        )
        .map(|ws| ws.acc)
        .reduce(
            || vec![0u64; acc_len],
            |mut a, b| {
                for (ai, bi) in a.iter_mut().zip(b.iter()) {
                    *ai ^= bi;
                }
                a
            },
        );

    // output bit i is product bit (n - 1 + i); coefficients beyond the
    // window are real but unrequested, so mask them off
    let first_bit = (n - 1) - 64 * acc_lo as u64;
    let mut out_words = shift_right_words(&acc, first_bit, m.div_ceil(64) as usize);
    if !m.is_multiple_of(64) {
        let last = out_words.len() - 1;
        out_words[last] &= (1u64 << (m % 64)) - 1;
    }
    BitString::from_words(m, out_words)
}
