//! 64 x 64 -> 127 bit carryless multiplication.
//!
//! Uses the PCLMULQDQ instruction when the CPU has it, otherwise a portable
//! 4-bit windowed kernel. Both paths are bit-identical.

use std::sync::OnceLock;

/// Portable kernel: precompute carryless a*v for v in 0..16, then combine
/// one nibble of b at a time.
pub(crate) fn clmul64_soft(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut tab = [0u128; 16];
    tab[1] = a;
    tab[2] = a << 1;
    tab[4] = a << 2;
    tab[8] = a << 3;
    tab[3] = tab[2] ^ a;
    tab[5] = tab[4] ^ a;
    tab[6] = tab[4] ^ tab[2];
    tab[7] = tab[6] ^ a;
    tab[9] = tab[8] ^ a;
    tab[10] = tab[8] ^ tab[2];
    tab[11] = tab[10] ^ a;
    tab[12] = tab[8] ^ tab[4];
    tab[13] = tab[12] ^ a;
    tab[14] = tab[12] ^ tab[2];
    tab[15] = tab[14] ^ a;

    let mut acc = 0u128;
    let mut b = b;
    let mut shift = 0u32;
    while b != 0 {
        acc ^= tab[(b & 15) as usize] << shift;
        b >>= 4;
        shift += 4;
    }
    acc
}

#[cfg(target_arch = "x86_64")]
mod hw {
    #[target_feature(enable = "pclmulqdq", enable = "sse4.1")]
    unsafe fn clmul64_pclmul(a: u64, b: u64) -> u128 {
        use std::arch::x86_64::*;
        let va = _mm_set_epi64x(0, a as i64);
        let vb = _mm_set_epi64x(0, b as i64);
        let r = _mm_clmulepi64_si128(va, vb, 0x00);
        let lo = _mm_cvtsi128_si64(r) as u64;
        let hi = _mm_extract_epi64(r, 1) as u64;
        ((hi as u128) << 64) | lo as u128
    }

    pub(super) fn clmul64_hw(a: u64, b: u64) -> u128 {
        // caller guarantees feature detection
        unsafe { clmul64_pclmul(a, b) }
    }

    pub(super) fn available() -> bool {
        is_x86_feature_detected!("pclmulqdq") && is_x86_feature_detected!("sse4.1")
    }
}

fn select_kernel() -> fn(u64, u64) -> u128 {
    #[cfg(target_arch = "x86_64")]
    {
        if hw::available() {
            return hw::clmul64_hw;
        }
    }
    clmul64_soft
}

static KERNEL: OnceLock<fn(u64, u64) -> u128> = OnceLock::new();

/// Carryless product of two 64-bit polynomials over GF(2).
#[inline]
pub fn clmul64(a: u64, b: u64) -> u128 {
    KERNEL.get_or_init(select_kernel)(a, b)
}
