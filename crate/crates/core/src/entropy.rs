//! Security calculus: entropy accumulation bound, extractor error, Markov
//! lifting, smooth composition, and certified output lengths.
//!
//! All logarithms are base 2 (units: bits). The per-trial entropy rate eta
//! is a pluggable strategy — the shipped forms are a constant rate (for
//! round-tripping published operating points) and an explicitly labeled
//! affine model with a finite-size sqrt(n) correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Protocol-level security parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams<R> {
    /// Final security parameter (trace distance to uniform).
    pub epsilon: R,
    /// Smoothing parameter; must satisfy `epsilon - 6*epsilon_s > 0`.
    pub epsilon_s: R,
    /// Entropy-accumulation failure parameter.
    pub epsilon_ea: R,
    /// Assumed SV bias of the sources.
    pub mu: R,
    /// Number of protocol trials.
    pub n: u64,
}

impl<R: Real> SecurityParams<R> {
    /// Defaults `epsilon_s = epsilon/12` (so `epsilon - 6 epsilon_s = epsilon/2`)
    /// and `epsilon_ea = epsilon`.
    pub fn with_default_smoothing(epsilon: R, mu: R, n: u64) -> Self {
        SecurityParams {
            epsilon,
            epsilon_s: epsilon / R::of(12.0),
            epsilon_ea: epsilon,
            mu,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("epsilon", self.epsilon),
            ("epsilon_s", self.epsilon_s),
            ("epsilon_ea", self.epsilon_ea),
        ] {
            if !(e > R::zero() && e < R::one()) {
                return Err(Error::domain(format!("{name} = {e} outside (0, 1)")));
            }
        }
        if self.epsilon - R::of(6.0) * self.epsilon_s <= R::zero() {
            return Err(Error::domain(format!(
                "epsilon - 6*epsilon_s = {} must be positive",
                self.epsilon - R::of(6.0) * self.epsilon_s
            )));
        }
        if !(self.mu >= R::zero() && self.mu < R::half()) {
            return Err(Error::domain(format!("mu = {} outside [0, 0.5)", self.mu)));
        }
        if self.n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        Ok(())
    }
}

/// Concrete extractor operating point: per-input length, output length,
/// the min-entropies claimed for the two sources, and the resulting error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorParams<R> {
    /// Per-input length in bits (both inputs).
    pub n_bits: u64,
    /// Output length in bits.
    pub m: u64,
    /// Min-entropy of the strong (seed) input.
    pub k1: R,
    /// Min-entropy of the second input.
    pub k2: R,
    /// Extractor error at this point; may underflow to 0 in the scalar
    /// type, in which case [`Self::log2_error`] carries the exponent.
    pub eps_ext: R,
}

impl<R: Real> ExtractorParams<R> {
    pub fn new(n_bits: u64, m: u64, k1: R, k2: R) -> Result<Self> {
        let params = ExtractorParams {
            n_bits,
            m,
            k1,
            k2,
            eps_ext: shift_extractor_error(n_bits, k1, k2, m),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let n = R::of_u64(self.n_bits);
        for (name, k) in [("k1", self.k1), ("k2", self.k2)] {
            if !(R::zero()..=n).contains(&k) {
                return Err(Error::domain(format!(
                    "{name} = {k} outside [0, {}]",
                    self.n_bits
                )));
            }
        }
        Ok(())
    }

    pub fn log2_error(&self) -> R {
        log2_shift_extractor_error(R::of_u64(self.n_bits), self.k1, self.k2, R::of_u64(self.m))
    }
}

/// Pluggable single-round entropy-rate function (bits/trial, clamped to [0, 2]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EtaStrategy<R> {
    /// Fixed rate regardless of the observed violation. Useful for tests
    /// and for reproducing published operating points via [`implied_eta`].
    Constant { rate: R },
    /// Labeled model rate: `max(0, alpha * (S_mu - s0)) - beta / sqrt(n)`,
    /// clamped to [0, 2]. Not a derived bound — a configurable stand-in.
    Affine { alpha: R, s0: R, beta: R },
}

impl<R: Real> EtaStrategy<R> {
    /// Entropy rate at the given violation level.
    pub fn rate(&self, s_mu: R, n: u64, _params: &SecurityParams<R>) -> R {
        let raw = match *self {
            EtaStrategy::Constant { rate } => rate,
            EtaStrategy::Affine { alpha, s0, beta } => {
                let gain = (alpha * (s_mu - s0)).max(R::zero());
                gain - beta / R::of_u64(n).sqrt()
            }
        };
        raw.max(R::zero()).min(R::two())
    }
}

/// Entropy-accumulation lower bound on the smooth min-entropy of the
/// device outputs: `n * eta(S_mu, n, params)`, clamped at 0.
pub fn eat_minentropy_bound<R: Real>(
    eta: &EtaStrategy<R>,
    s_mu: R,
    params: &SecurityParams<R>,
) -> Result<R> {
    params.validate()?;
    if s_mu < R::zero() {
        return Err(Error::domain(format!("S_mu = {s_mu} must be nonnegative")));
    }
    Ok((R::of_u64(params.n) * eta.rate(s_mu, params.n, params)).max(R::zero()))
}

/// log2 of the two-source extractor error for the shift-matrix family:
/// `log2(eps) = -(k1 + k2 - N - 2m)/2`.
pub fn log2_shift_extractor_error<R: Real>(n_bits: R, k1: R, k2: R, m: R) -> R {
    -(k1 + k2 - n_bits - R::two() * m) * R::half()
}

/// Extractor error `2^(-(k1 + k2 - N - 2m)/2)`. May exceed 1 when the
/// entropy budget is insufficient; the caller interprets.
pub fn shift_extractor_error<R: Real>(n_bits: u64, k1: R, k2: R, m: u64) -> R {
    log2_shift_extractor_error(R::of_u64(n_bits), k1, k2, R::of_u64(m)).exp2()
}

/// Composition of the extractor error through the Markov-model lifting and
/// smooth-min-entropy composition bounds.
#[derive(Clone, Debug, Serialize)]
pub struct CompositionReport<R> {
    /// Quantum-proof (Markov model) extractor error: `sqrt(3 * eps * 2^(m-2))`.
    pub eps_markov: R,
    /// Min-entropy surcharge per source from the lifting: `log2(1/eps)`.
    pub entropy_offset_bits: R,
    /// Total composed error: `6 d1 + 6 d2 + 2 e1 + 2 e2 + 2 eps_markov`.
    pub total: R,
}

/// Lift a classical extractor error into the Markov model and compose it
/// with the smoothing/entropy-approximation penalties.
pub fn compose_security<R: Real>(
    eps_ext: R,
    m: u64,
    delta1: R,
    delta2: R,
    eps1: R,
    eps2: R,
) -> Result<CompositionReport<R>> {
    for (name, e) in [
        ("eps_ext", eps_ext),
        ("delta1", delta1),
        ("delta2", delta2),
        ("eps1", eps1),
        ("eps2", eps2),
    ] {
        if !(e > R::zero() && e <= R::one()) {
            return Err(Error::domain(format!("{name} = {e} outside (0, 1]")));
        }
    }
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    // computed in log2 domain to survive extreme parameters
    let log2_eps_markov =
        (R::of(3.0).log2() + eps_ext.log2() + R::of_u64(m) - R::two()) * R::half();
    let eps_markov = log2_eps_markov.exp2();
    let six = R::of(6.0);
    let total = six * delta1 + six * delta2 + R::two() * eps1 + R::two() * eps2
        + R::two() * eps_markov;
    Ok(CompositionReport {
        eps_markov,
        entropy_offset_bits: -eps_ext.log2(),
        total,
    })
}

/// `2 * log2(1/(1/2 + mu)) - 2`: the per-trial entropy deficit of the seed
/// source relative to the extractor's consumption.
fn seed_rate_term<R: Real>(mu: R) -> R {
    R::two() * (R::one() / (R::half() + mu)).log2() - R::two()
}

/// `log2(6 / (epsilon - 6 epsilon_s))`.
fn security_log_term<R: Real>(params: &SecurityParams<R>) -> R {
    (R::of(6.0) / (params.epsilon - R::of(6.0) * params.epsilon_s)).log2()
}

/// Certified fixed output length:
/// `m = max(floor(n/6 * (eta + 2 log2(1/(1/2+mu)) - 2) - log2(6/(eps - 6 eps_s))), 0)`.
pub fn output_length<R: Real>(
    s_mu: R,
    eta: &EtaStrategy<R>,
    params: &SecurityParams<R>,
) -> Result<u64> {
    params.validate()?;
    if s_mu < R::zero() {
        return Err(Error::domain(format!("S_mu = {s_mu} must be nonnegative")));
    }
    let rate = eta.rate(s_mu, params.n, params);
    let term = rate + seed_rate_term(params.mu);
    let rhs = R::of_u64(params.n) / R::of(6.0) * term - security_log_term(params);
    if rhs <= R::zero() {
        return Ok(0);
    }
    Ok(rhs.floor().to_u64().unwrap_or(0))
}

/// Adaptive output sizing on a violation grid of `grid_steps` cells up to
/// `s_mu_max`: quantize the observed violation down to the grid, cap it,
/// and size the output there. Security degrades to `grid_steps * epsilon`.
#[derive(Clone, Debug, Serialize)]
pub struct AdaptiveOutput<R> {
    pub m: u64,
    /// Violation level actually used after quantization and capping.
    pub s_mu_used: R,
    /// Degraded security parameter `grid_steps * epsilon`.
    pub security: R,
}

pub fn adaptive_output_length<R: Real>(
    s_mu_obs: R,
    s_mu_max: R,
    grid_steps: u64,
    eta: &EtaStrategy<R>,
    params: &SecurityParams<R>,
) -> Result<AdaptiveOutput<R>> {
    params.validate()?;
    if grid_steps == 0 {
        return Err(Error::domain("grid_steps must be at least 1"));
    }
    if s_mu_max <= R::zero() || s_mu_max.is_nan() {
        return Err(Error::domain(format!("s_mu_max = {s_mu_max} must be positive")));
    }
    let security = R::of_u64(grid_steps) * params.epsilon;
    let delta = s_mu_max / R::of_u64(grid_steps);
    let steps = (s_mu_obs / delta).floor();
    let quantized = (steps * delta).min(s_mu_max);
    if quantized <= R::zero() {
        // below the first grid cell no violation level is certified
        return Ok(AdaptiveOutput { m: 0, s_mu_used: R::zero(), security });
    }
    // the adaptive sizing rule evaluates eta with the EA parameter set to
    // the final epsilon
    let adaptive_params = SecurityParams { epsilon_ea: params.epsilon, ..params.clone() };
    let m = output_length(quantized, eta, &adaptive_params)?;
    Ok(AdaptiveOutput { m, s_mu_used: quantized, security })
}

/// Entropy rate implied by a target output length: inverts the fixed-length
/// condition at equality,
/// `eta = 6 (m + log2(6/(eps - 6 eps_s))) / n - 2 log2(1/(1/2+mu)) + 2`.
pub fn implied_eta<R: Real>(m: u64, params: &SecurityParams<R>) -> Result<R> {
    params.validate()?;
    Ok(R::of(6.0) * (R::of_u64(m) + security_log_term(params)) / R::of_u64(params.n)
        - seed_rate_term(params.mu))
}
