//! Reference oracle: literal matrix-form evaluation, O(N*m).

use crate::bitstore::BitString;
use crate::error::{Error, Result};

use super::ShiftExtractorSpec;

fn check_inputs(spec: &ShiftExtractorSpec, x: &BitString, y: &BitString) -> Result<()> {
    spec.validate()?;
    if x.len() != spec.input_bits || y.len() != spec.input_bits {
        return Err(Error::domain(format!(
            "input lengths {} and {} do not match spec N = {}",
            x.len(),
            y.len(),
            spec.input_bits
        )));
    }
    Ok(())
}

/// `out[i] = XOR over k of x[k+i] & y[k]` evaluated row by row: each output
/// bit is the parity of `(x >> i) & y`.
pub fn extract_naive(
    spec: &ShiftExtractorSpec,
    x: &BitString,
    y: &BitString,
) -> Result<BitString> {
    check_inputs(spec, x, y)?;
    let yw = y.words();
    let mut out = BitString::zeros(spec.output_bits);
    for i in 0..spec.output_bits {
        let word_shift = (i / 64) as usize;
        let bit_shift = (i % 64) as u32;
        let mut parity = 0u32;
        for (k, &yk) in yw.iter().enumerate() {
            let lo = x.word_or_zero(k + word_shift) >> bit_shift;
            let hi = if bit_shift == 0 {
                0
            } else {
                x.word_or_zero(k + word_shift + 1) << (64 - bit_shift)
            };
            parity ^= ((lo | hi) & yk).count_ones();
        }
        if parity & 1 == 1 {
            out.set(i, true);
        }
    }
    Ok(out)
}
