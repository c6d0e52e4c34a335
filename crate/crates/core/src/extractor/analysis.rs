//! Exact output-distribution analysis for small instances.
//!
//! Enumerates every input pair, builds the exact output distribution, and
//! compares its total-variation distance to uniform (and the strong variant
//! jointly with the first input) against the extractor error bound computed
//! from the sources' exact min-entropies.

use crate::error::{Error, Result};
use crate::real::Real;

use super::ShiftExtractorSpec;

/// Largest per-input length the exhaustive analyzer accepts.
pub const MAX_ANALYSIS_BITS: u64 = 14;

#[derive(Clone, Debug)]
pub struct TvReport<R> {
    /// TV distance of the output to uniform on m bits.
    pub tv: R,
    /// Strong variant: TV of (output, first input) to uniform x first-input.
    pub tv_strong: R,
    /// Error bound `2^(-(k1 + k2 - N - 2m)/2)` at the exact min-entropies.
    pub bound: R,
    pub k1: R,
    pub k2: R,
}

/// Extractor output for word-sized inputs; same convention as the bit
/// engines: `out[i] = parity((x >> i) & y)`.
fn extract_small(x: u32, y: u32, m: u32) -> u32 {
    let mut out = 0u32;
    for i in 0..m {
        out |= (((x >> i) & y).count_ones() & 1) << i;
    }
    out
}

fn check_distribution<R: Real>(name: &str, dist: &[R], size: usize) -> Result<()> {
    if dist.len() != size {
        return Err(Error::domain(format!(
            "{name} has {} entries, expected {size}",
            dist.len()
        )));
    }
    if dist.iter().any(|&p| p < R::zero()) {
        return Err(Error::domain(format!("{name} has negative entries")));
    }
    let sum: R = dist.iter().copied().sum();
    if (sum - R::one()).abs() > R::of(1e-9) {
        return Err(Error::domain(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

fn min_entropy<R: Real>(dist: &[R]) -> R {
    let max = dist.iter().copied().fold(R::zero(), R::max);
    -max.log2()
}

/// Exact TV distances of the extractor output to uniform under explicit
/// input distributions, plus the theoretical bound. `N <= 14` only.
pub fn exact_tv_to_uniform<R: Real>(
    spec: &ShiftExtractorSpec,
    dist_x: &[R],
    dist_y: &[R],
) -> Result<TvReport<R>> {
    spec.validate()?;
    if spec.input_bits > MAX_ANALYSIS_BITS {
        return Err(Error::capacity(format!(
            "exhaustive analysis supports N <= {MAX_ANALYSIS_BITS}, got {}",
            spec.input_bits
        )));
    }
    let n = spec.input_bits as u32;
    let m = spec.output_bits as u32;
    let size = 1usize << n;
    check_distribution("dist_x", dist_x, size)?;
    check_distribution("dist_y", dist_y, size)?;

    let out_size = 1usize << m;
    let uniform = R::one() / R::of_u64(out_size as u64);
    let mut pout = vec![R::zero(); out_size];
    let mut pcond = vec![R::zero(); out_size];
    let mut tv_strong_sum = R::zero();

    let y_support: Vec<(u32, R)> = dist_y
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > R::zero())
        .map(|(y, &p)| (y as u32, p))
        .collect();

    for (x, &px) in dist_x.iter().enumerate() {
        if px <= R::zero() {
            continue;
        }
        for p in pcond.iter_mut() {
            *p = R::zero();
        }
        for &(y, py) in &y_support {
            let o = extract_small(x as u32, y, m) as usize;
            pcond[o] = pcond[o] + py;
        }
        for (o, &pc) in pcond.iter().enumerate() {
            pout[o] = pout[o] + px * pc;
            tv_strong_sum = tv_strong_sum + (px * pc - px * uniform).abs();
        }
    }

    let tv: R = pout.iter().map(|&p| (p - uniform).abs()).sum::<R>() * R::half();
    let tv_strong = tv_strong_sum * R::half();
    let k1 = min_entropy(dist_x);
    let k2 = min_entropy(dist_y);
    let bound = crate::entropy::shift_extractor_error(spec.input_bits, k1, k2, spec.output_bits);
    Ok(TvReport { tv, tv_strong, bound, k1, k2 })
}

/// Flat distribution on the first `support` strings of length `n` bits.
pub fn flat_distribution<R: Real>(n: u64, support: usize) -> Result<Vec<R>> {
    let size = 1usize << n;
    if support == 0 || support > size {
        return Err(Error::domain(format!(
            "support {support} outside [1, {size}]"
        )));
    }
    let mut dist = vec![R::zero(); size];
    let p = R::one() / R::of_u64(support as u64);
    for slot in dist.iter_mut().take(support) {
        *slot = p;
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_extract_matches_bit_engine() {
        use crate::bitstore::BitString;
        use crate::extractor::extract_naive;
        let spec = ShiftExtractorSpec::new(6, 3).unwrap();
        for x in 0..64u32 {
            for y in 0..64u32 {
                let xb = BitString::from_bools(
                    &(0..6).map(|j| x >> j & 1 == 1).collect::<Vec<_>>(),
                );
                let yb = BitString::from_bools(
                    &(0..6).map(|j| y >> j & 1 == 1).collect::<Vec<_>>(),
                );
                let reference = extract_naive(&spec, &xb, &yb).unwrap();
                let got = extract_small(x, y, 3);
                for i in 0..3u32 {
                    assert_eq!(got >> i & 1 == 1, reference.get(i as u64));
                }
            }
        }
    }

    #[test]
    fn uniform_inputs_n4_m1() {
        // inner product bit of two uniform 4-bit strings:
        // Pr[0] = 1/16 + 15/32 -> tv = 2^-5
        let spec = ShiftExtractorSpec::new(4, 1).unwrap();
        let u = flat_distribution::<f64>(4, 16).unwrap();
        let rep = exact_tv_to_uniform(&spec, &u, &u).unwrap();
        assert!((rep.tv - 0.03125).abs() < 1e-12, "tv = {}", rep.tv);
        assert!((rep.bound - 0.5).abs() < 1e-12);
        assert!(rep.tv <= rep.bound);
        assert!((rep.k1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_brings_vacuous_bound() {
        let spec = ShiftExtractorSpec::new(4, 1).unwrap();
        let mut point = vec![0.0f64; 16];
        point[0] = 1.0; // x = 0 annihilates: output always 0
        let u = flat_distribution::<f64>(4, 16).unwrap();
        let rep = exact_tv_to_uniform(&spec, &point, &u).unwrap();
        assert!(rep.bound >= 1.0, "bound = {}", rep.bound);
        assert!((rep.k1 - 0.0).abs() < 1e-12);
        assert!((rep.tv - 0.5).abs() < 1e-12, "tv = {}", rep.tv);
    }

    #[test]
    fn flat_sources_meet_bound_n12() {
        let spec = ShiftExtractorSpec::new(12, 2).unwrap();
        let d = flat_distribution::<f64>(12, 1 << 10).unwrap();
        let rep = exact_tv_to_uniform(&spec, &d, &d).unwrap();
        assert!((rep.bound - 0.25).abs() < 1e-12);
        assert!(rep.tv <= rep.bound, "tv = {} > bound", rep.tv);
        assert!(rep.tv_strong <= rep.bound, "strong tv = {} > bound", rep.tv_strong);
    }

    #[test]
    fn capacity_and_validation() {
        let spec = ShiftExtractorSpec::new(15, 2).unwrap();
        let d = vec![0.5f64, 0.5];
        assert!(matches!(
            exact_tv_to_uniform(&spec, &d, &d),
            Err(Error::Capacity(_))
        ));
        let spec = ShiftExtractorSpec::new(2, 1).unwrap();
        assert!(exact_tv_to_uniform(&spec, &[0.5f64, 0.5, 0.0, 0.0], &[0.6, 0.6, 0.0, 0.0]).is_err());
        assert!(exact_tv_to_uniform(&spec, &[0.5f64, 0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn strong_variant_dominates_plain() {
        // revealing X1 can only increase distinguishability
        let spec = ShiftExtractorSpec::new(8, 2).unwrap();
        let dx = flat_distribution::<f64>(8, 100).unwrap();
        let dy = flat_distribution::<f64>(8, 64).unwrap();
        let rep = exact_tv_to_uniform(&spec, &dx, &dy).unwrap();
        assert!(rep.tv_strong >= rep.tv - 1e-12);
    }
}
