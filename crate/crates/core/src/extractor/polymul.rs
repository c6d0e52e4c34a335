//! Carryless polynomial multiplication on u64-word slices (LSB-first).
//!
//! Schoolbook below [`KARATSUBA_THRESHOLD`] words, Karatsuba above. The
//! fast extractor always multiplies equal power-of-two word counts, so the
//! recursion splits evenly all the way down.

use super::clmul::clmul64;

const KARATSUBA_THRESHOLD: usize = 24;

/// Scratch words needed by [`poly_mul`] for operands of `n` words.
pub fn scratch_len(n: usize) -> usize {
    // each level consumes 2n and recurses on n/2: bounded by 4n + slack
    4 * n + 64
}

fn mul_schoolbook(a: &[u64], b: &[u64], out: &mut [u64]) {
    out[..a.len() + b.len()].fill(0);
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj == 0 {
                continue;
            }
            let p = clmul64(ai, bj);
            out[i + j] ^= p as u64;
            out[i + j + 1] ^= (p >> 64) as u64;
        }
    }
}

fn karatsuba(a: &[u64], b: &[u64], out: &mut [u64], scratch: &mut [u64]) {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    if n <= KARATSUBA_THRESHOLD || n % 2 == 1 {
        mul_schoolbook(a, b, out);
        return;
    }
    let h = n / 2;
    let (a0, a1) = a.split_at(h);
    let (b0, b1) = b.split_at(h);
    let (asum, rest) = scratch.split_at_mut(h);
    let (bsum, rest) = rest.split_at_mut(h);
    let (p1, child) = rest.split_at_mut(n);
    for i in 0..h {
        asum[i] = a0[i] ^ a1[i];
        bsum[i] = b0[i] ^ b1[i];
    }
    karatsuba(a0, b0, &mut out[..n], child);
    karatsuba(a1, b1, &mut out[n..2 * n], child);
    karatsuba(asum, bsum, p1, child);
    for i in 0..n {
        p1[i] ^= out[i] ^ out[n + i];
    }
    for i in 0..n {
        out[h + i] ^= p1[i];
    }
}

/// `out[..2n] = a * b` over GF(2)[t], operands of equal word count `n`.
/// `scratch` must hold at least [`scratch_len`]`(n)` words.
pub fn poly_mul(a: &[u64], b: &[u64], out: &mut [u64], scratch: &mut [u64]) {
    assert_eq!(a.len(), b.len(), "poly_mul expects equal-length operands");
    assert!(out.len() >= 2 * a.len());
    karatsuba(a, b, out, scratch);
}
