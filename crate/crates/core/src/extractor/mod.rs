//! Two-source extractor over GF(2): output bit `i` is `x^T A_i y` with
//! `A_i` the non-cyclic right shift by `i-1` positions.
//!
//! Bit convention (0-based): `out[i] = XOR over k of x[k+i] & y[k]` for
//! `k = 0 .. N-1-i`. The first argument `x` occupies the strong slot of the
//! extractor. [`extract_naive`] is the normative definition; the fast
//! engine must match it bit-exactly. The shift direction is a fixed,
//! documented convention — implementations with the opposite orientation
//! are equally valid extractors but produce different bits.

mod analysis;
mod clmul;
mod fast;
mod naive;
mod polymul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{exact_tv_to_uniform, flat_distribution, TvReport, MAX_ANALYSIS_BITS};
pub use clmul::clmul64;
pub use fast::{extract_fast, extract_fast_with_block};
pub use naive::extract_naive;
pub use polymul::poly_mul;

/// Shift-extractor dimensions: both inputs have `input_bits` bits and the
/// output has `output_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftExtractorSpec {
    pub input_bits: u64,
    pub output_bits: u64,
}

impl ShiftExtractorSpec {
    pub fn new(input_bits: u64, output_bits: u64) -> Result<Self> {
        let spec = ShiftExtractorSpec { input_bits, output_bits };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_bits < 1 || self.output_bits > self.input_bits {
            return Err(Error::domain(format!(
                "output length {} outside [1, {}]",
                self.output_bits, self.input_bits
            )));
        }
        Ok(())
    }
}
