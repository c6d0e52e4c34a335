//! Classical distribution distance and a small statistical test battery.
//!
//! The battery is a three-test subset (monobit frequency, block frequency
//! with 128-bit blocks, runs) used as an output sanity check; it guards
//! against gross faults, it is not a certification.

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::bitstore::BitString;
use crate::error::{Error, Result};
use crate::real::Real;

/// Finite probability distribution with optional outcome labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<R> {
    labels: Option<Vec<String>>,
    probs: Vec<R>,
}

impl<R: Real> Distribution<R> {
    pub fn new(probs: Vec<R>) -> Result<Self> {
        Self::build(None, probs)
    }

    pub fn labeled(labels: Vec<String>, probs: Vec<R>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::domain("label and probability counts differ"));
        }
        Self::build(Some(labels), probs)
    }

    fn build(labels: Option<Vec<String>>, probs: Vec<R>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("distribution needs at least one outcome"));
        }
        if probs.iter().any(|&p| p < R::zero()) {
            return Err(Error::domain("negative probability"));
        }
        let sum: R = probs.iter().copied().sum();
        if (sum - R::one()).abs() > R::of(1e-12) {
            return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Distribution { labels, probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("uniform distribution needs k >= 1"));
        }
        Ok(Distribution {
            labels: None,
            probs: vec![R::one() / R::of_u64(k as u64); k],
        })
    }

    pub fn probs(&self) -> &[R] {
        &self.probs
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Trace distance `1/2 * sum_x |p(x) - q(x)|` between distributions on the
/// same outcome space.
pub fn trace_distance<R: Real>(p: &Distribution<R>, q: &Distribution<R>) -> Result<R> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::domain(format!(
            "outcome spaces differ: {} vs {}",
            p.probs.len(),
            q.probs.len()
        )));
    }
    if let (Some(pl), Some(ql)) = (&p.labels, &q.labels) {
        if pl != ql {
            return Err(Error::domain("outcome labels differ"));
        }
    }
    let sum: R = p
        .probs
        .iter()
        .zip(q.probs.iter())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(sum * R::half())
}

/// Result of one statistical test.
#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    pub name: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Battery report; pass criterion is `p >= alpha` per test.
#[derive(Clone, Debug, Serialize)]
pub struct BatteryReport {
    pub bits: u64,
    pub alpha: f64,
    pub tests: Vec<TestResult>,
    pub all_pass: bool,
}

const MIN_BATTERY_BITS: u64 = 10_000;
const BLOCK_BITS: u64 = 128;
pub const BATTERY_ALPHA: f64 = 0.01;

fn monobit(bits: &BitString) -> TestResult {
    let n = bits.len() as f64;
    let ones = bits.count_ones() as f64;
    let s = 2.0 * ones - n; // sum of +/-1
    let s_obs = s.abs() / n.sqrt();
    let p = erfc(s_obs / std::f64::consts::SQRT_2);
    TestResult { name: "monobit-frequency", statistic: s_obs, p_value: p, pass: p >= BATTERY_ALPHA }
}

fn block_frequency(bits: &BitString) -> TestResult {
    let m = BLOCK_BITS;
    let blocks = bits.len() / m;
    let mut chi2 = 0.0f64;
    for b in 0..blocks {
        let ones = (b * m..(b + 1) * m).filter(|&j| bits.get(j)).count() as f64;
        let pi = ones / m as f64;
        chi2 += (pi - 0.5) * (pi - 0.5);
    }
    chi2 *= 4.0 * m as f64;
    // Q(a, 0) = 1; statrs rejects x = 0
    let p = if chi2 > 0.0 { gamma_ur(blocks as f64 / 2.0, chi2 / 2.0) } else { 1.0 };
    TestResult { name: "block-frequency", statistic: chi2, p_value: p, pass: p >= BATTERY_ALPHA }
}

fn runs(bits: &BitString) -> TestResult {
    let n = bits.len();
    let nf = n as f64;
    let pi = bits.count_ones() as f64 / nf;
    // frequency pre-test
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return TestResult { name: "runs", statistic: f64::NAN, p_value: 0.0, pass: false };
    }
    let mut v = 1u64;
    let mut prev = bits.get(0);
    for j in 1..n {
        let cur = bits.get(j);
        if cur != prev {
            v += 1;
        }
        prev = cur;
    }
    let vf = v as f64;
    let num = (vf - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    let p = erfc(num / den);
    TestResult { name: "runs", statistic: vf, p_value: p, pass: p >= BATTERY_ALPHA }
}

/// Run the three-test battery at alpha = 0.01. Requires at least 10^4 bits.
pub fn test_battery(bits: &BitString) -> Result<BatteryReport> {
    if bits.len() < MIN_BATTERY_BITS {
        return Err(Error::capacity(format!(
            "battery requires at least {MIN_BATTERY_BITS} bits, got {}",
            bits.len()
        )));
    }
    let tests = vec![monobit(bits), block_frequency(bits), runs(bits)];
    let all_pass = tests.iter().all(|t| t.pass);
    Ok(BatteryReport { bits: bits.len(), alpha: BATTERY_ALPHA, tests, all_pass })
}
