//! Empirical MDL and CHSH estimation.
//!
//! The MDL combination
//! `S_mu = mu_min*P(0000) - mu_max*(P(0101) + P(1010) + P(0011))`
//! (cells indexed (a, b, x, y)) is classically bounded by 0 when inputs come
//! from a μ-SV source; `mu = 0` reduces it to the CHSH inequality in
//! Eberhard form. The combination is generic over the scalar so the exact
//! rational LHV optimizer and the floating-point estimators share one
//! definition.

use std::io::Write;

use num_traits::Num;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstore::{CountTable16, Trial, TrialRecordSet};
use crate::error::{Error, Result};
use crate::real::Real;

/// Source-bias bounds entering the MDL inequality:
/// `mu_min = (1/2 - mu)^2`, `mu_max = (1/2 + mu)^2` for a pair of μ-SV bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdlParams<T> {
    pub mu: T,
    pub mu_min: T,
    pub mu_max: T,
}

impl<T: Clone + Num + PartialOrd + std::fmt::Display> MdlParams<T> {
    pub fn new(mu: T) -> Result<Self> {
        let half = T::one() / (T::one() + T::one());
        if mu < T::zero() || mu >= half {
            return Err(Error::domain(format!("mu = {mu} outside [0, 0.5)")));
        }
        let lo = half.clone() - mu.clone();
        let hi = half + mu.clone();
        Ok(MdlParams {
            mu,
            mu_min: lo.clone() * lo,
            mu_max: hi.clone() * hi,
        })
    }
}

/// Eq.-4 combination on the four relevant joint probabilities.
pub fn s_mu_combination<T: Clone + Num>(
    params: &MdlParams<T>,
    p0000: T,
    p0101: T,
    p1010: T,
    p0011: T,
) -> T {
    params.mu_min.clone() * p0000 - params.mu_max.clone() * (p0101 + p1010 + p0011)
}

/// Tally all trials into the 16-cell joint table.
///
/// Parallel reduction over the packed bytes; the result is independent of
/// partitioning. Every trial is counted (fair-sampling posture).
pub fn tally(trials: &TrialRecordSet) -> Result<CountTable16> {
    if trials.is_empty() {
        return Err(Error::domain("tally requires at least one trial"));
    }
    let n = trials.n();
    let bytes = trials.packed_bytes();
    // cell nibble -> count index
    let mut map = [0usize; 16];
    for (cell, slot) in map.iter_mut().enumerate() {
        let t = Trial::unpack(cell as u8);
        *slot = CountTable16::index(t.a, t.b, t.x, t.y);
    }

    const CHUNK: usize = 1 << 16;
    let table = bytes
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut counts = [0u64; 16];
            let base_trial = (ci * CHUNK) as u64 * 2;
            for (bi, &byte) in chunk.iter().enumerate() {
                let t0 = base_trial + 2 * bi as u64;
                counts[map[(byte & 0x0F) as usize]] += 1;
                if t0 + 1 < n {
                    counts[map[(byte >> 4) as usize]] += 1;
                }
            }
            CountTable16::from_counts(counts)
        })
        .reduce(CountTable16::new, |mut a, b| {
            a.merge(&b);
            a
        });
    debug_assert_eq!(table.total(), n);
    Ok(table)
}

/// Observed MDL value and the protocol abort decision (`S_mu < 0`).
///
/// Uses the configured μ bounds, not empirical input frequencies: μ is an
/// assumption about the source, not something estimated from the data.
pub fn s_mu_observed<R: Real>(counts: &CountTable16, params: &MdlParams<R>) -> Result<(R, bool)> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::domain("empty count table"));
    }
    let t = R::of_u64(total);
    let p = |a, b, x, y| R::of_u64(counts.count(a, b, x, y)) / t;
    let s_mu = s_mu_combination(
        params,
        p(false, false, false, false),
        p(false, true, false, true),
        p(true, false, true, false),
        p(false, false, true, true),
    );
    Ok((s_mu, s_mu < R::zero()))
}

/// Input pairs whose empirical frequency leaves the declared μ envelope by
/// more than `sigmas` binomial standard deviations. Advisory only.
pub fn input_bias_warnings<R: Real>(
    counts: &CountTable16,
    params: &MdlParams<R>,
    sigmas: f64,
) -> Vec<String> {
    let total = counts.total();
    if total == 0 {
        return Vec::new();
    }
    let n = total as f64;
    let mu_min = params.mu_min.to_f64().unwrap();
    let mu_max = params.mu_max.to_f64().unwrap();
    let mut warnings = Vec::new();
    for x in [false, true] {
        for y in [false, true] {
            let phat = counts.input_pair_total(x, y) as f64 / n;
            let sd_hi = (mu_max * (1.0 - mu_max) / n).sqrt();
            let sd_lo = (mu_min * (1.0 - mu_min) / n).sqrt().max(1.0 / n);
            if phat > mu_max + sigmas * sd_hi || phat < mu_min - sigmas * sd_lo {
                warnings.push(format!(
                    "input pair (x={}, y={}) frequency {:.6} outside [{:.6}, {:.6}]",
                    x as u8, y as u8, phat, mu_min, mu_max
                ));
            }
        }
    }
    warnings
}

/// Observed CHSH value from per-input-pair conditional correlators:
/// `S = E_00 + E_01 + E_10 - E_11` with `E = (agree - disagree) / N_xy`.
pub fn chsh_observed<R: Real>(counts: &CountTable16) -> Result<R> {
    let mut e = [[R::zero(); 2]; 2];
    for (xi, x) in [false, true].into_iter().enumerate() {
        for (yi, y) in [false, true].into_iter().enumerate() {
            let n_xy = counts.input_pair_total(x, y);
            if n_xy == 0 {
                return Err(Error::MissingInputPair { x: x as u8, y: y as u8 });
            }
            let agree = counts.count(false, false, x, y) + counts.count(true, true, x, y);
            let disagree = counts.count(false, true, x, y) + counts.count(true, false, x, y);
            e[xi][yi] = (R::of_u64(agree) - R::of_u64(disagree)) / R::of_u64(n_xy);
        }
    }
    Ok(e[0][0] + e[0][1] + e[1][0] - e[1][1])
}

/// One block of the stability series.
#[derive(Clone, Debug, Serialize)]
pub struct BlockPoint<R> {
    pub block: u64,
    pub trials: u64,
    pub s: R,
    pub s_mu: R,
    pub partial: bool,
}

/// Per-chunk (S, S_mu) series over consecutive chunks; a final partial
/// chunk is included and flagged. `chunk > n` yields a single flagged block.
pub fn block_series<R: Real>(
    trials: &TrialRecordSet,
    chunk: u64,
    params: &MdlParams<R>,
) -> Result<Vec<BlockPoint<R>>> {
    if chunk == 0 {
        return Err(Error::domain("chunk size must be at least 1"));
    }
    if trials.is_empty() {
        return Err(Error::domain("block series requires at least one trial"));
    }
    let n = trials.n();
    let mut points = Vec::new();
    let mut lo = 0u64;
    let mut block = 0u64;
    while lo < n {
        let hi = (lo + chunk).min(n);
        let slice = trials.slice(lo, hi);
        let counts = tally(&slice)?;
        let (s_mu, _) = s_mu_observed(&counts, params)?;
        let s = chsh_observed(&counts)?;
        points.push(BlockPoint {
            block,
            trials: hi - lo,
            s,
            s_mu,
            partial: hi - lo < chunk,
        });
        block += 1;
        lo = hi;
    }
    Ok(points)
}

/// CSV export with header `block,S,S_mu`.
pub fn write_block_series_csv<R: Real, W: Write>(
    points: &[BlockPoint<R>],
    sink: &mut W,
) -> Result<()> {
    writeln!(sink, "block,S,S_mu")?;
    for p in points {
        writeln!(sink, "{},{},{}", p.block, p.s, p.s_mu)?;
    }
    Ok(())
}
