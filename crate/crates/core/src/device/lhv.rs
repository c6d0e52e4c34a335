//! Measurement-dependent local (LHV) models and the exact classical bound.
//!
//! A hidden value lambda fixes deterministic response tables a(x), b(y) and
//! an input distribution p(x, y | lambda) whose entries must stay inside the
//! declared [mu_min, mu_max] envelope. The brute-force optimizer maximizes
//! S_mu over all such models in exact rational arithmetic; the maximum is 0,
//! and floating point would blur that assertion.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstore::Trial;
use crate::error::{Error, Result};
use crate::inequality::MdlParams;
use crate::real::Real;

use super::quantum::DEVICE_STREAM;

/// Deterministic response tables: `a[x]`, `b[y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LhvStrategy {
    pub a: [bool; 2],
    pub b: [bool; 2],
}

impl LhvStrategy {
    /// All 16 deterministic response pairs.
    pub fn all() -> impl Iterator<Item = LhvStrategy> {
        (0..16u8).map(|k| LhvStrategy {
            a: [k & 1 != 0, k & 2 != 0],
            b: [k & 4 != 0, k & 8 != 0],
        })
    }

    pub fn respond(&self, x: bool, y: bool) -> (bool, bool) {
        (self.a[x as usize], self.b[y as usize])
    }
}

/// One hidden value: its weight, response tables, and input distribution
/// p(x, y | lambda) indexed x<<1|y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhvComponent<R> {
    pub weight: R,
    pub strategy: LhvStrategy,
    pub input_probs: [R; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhvDeviceModel<R> {
    pub components: Vec<LhvComponent<R>>,
    pub seed: u64,
}

impl<R: Real> LhvDeviceModel<R> {
    /// Single deterministic strategy with uniform inputs.
    pub fn deterministic(strategy: LhvStrategy, seed: u64) -> Self {
        LhvDeviceModel {
            components: vec![LhvComponent {
                weight: R::one(),
                strategy,
                input_probs: [R::of(0.25); 4],
            }],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::domain("LHV model needs at least one hidden value"));
        }
        let tol = R::of(1e-9);
        let mut wsum = R::zero();
        for c in &self.components {
            if c.weight < R::zero() {
                return Err(Error::domain("negative hidden-value weight"));
            }
            wsum = wsum + c.weight;
            let mut psum = R::zero();
            for &p in &c.input_probs {
                if p < R::zero() {
                    return Err(Error::domain("negative input probability"));
                }
                psum = psum + p;
            }
            if (psum - R::one()).abs() > tol {
                return Err(Error::domain("input distribution not normalized"));
            }
        }
        if (wsum - R::one()).abs() > tol {
            return Err(Error::domain("hidden-value weights not normalized"));
        }
        Ok(())
    }

    /// Check every input-distribution entry against the declared μ envelope.
    pub fn validate_envelope(&self, mu: R) -> Result<()> {
        self.validate()?;
        let params = MdlParams::new(mu)?;
        let tol = R::of(1e-12);
        for c in &self.components {
            for &p in &c.input_probs {
                if p < params.mu_min - tol || p > params.mu_max + tol {
                    return Err(Error::domain(format!(
                        "input probability {p} outside [{}, {}]",
                        params.mu_min, params.mu_max
                    )));
                }
            }
        }
        Ok(())
    }
}

fn half_rational() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

/// Exact dyadic rational equal to the given float.
fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::domain(format!("{x} is not finite")))
}

/// MDL cell weight of a deterministic strategy at input pair (x, y):
/// +mu_min for the (0,0,0,0) cell, -mu_max for the three Eberhard cells,
/// 0 otherwise.
fn strategy_weights(params: &MdlParams<BigRational>, s: LhvStrategy) -> [BigRational; 4] {
    let mut w = [
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
    ];
    for (xi, x) in [false, true].into_iter().enumerate() {
        for (yi, y) in [false, true].into_iter().enumerate() {
            let (a, b) = s.respond(x, y);
            let cell = (a, b, x, y);
            w[xi << 1 | yi] = if cell == (false, false, false, false) {
                params.mu_min.clone()
            } else if cell == (false, true, false, true)
                || cell == (true, false, true, false)
                || cell == (false, false, true, true)
            {
                -params.mu_max.clone()
            } else {
                BigRational::zero()
            };
        }
    }
    w
}

/// Maximize sum(p_i * w_i) over p in [mu_min, mu_max]^4 with sum(p) = 1.
///
/// Greedy fill: start every coordinate at mu_min and spend the remaining
/// budget on the largest weights first — optimal for a linear objective on
/// this box/simplex intersection.
fn maximize_over_inputs(
    params: &MdlParams<BigRational>,
    weights: &[BigRational; 4],
) -> BigRational {
    let four = BigRational::from_integer(BigInt::from(4));
    let mut budget = BigRational::one() - params.mu_min.clone() * four;
    let headroom = params.mu_max.clone() - params.mu_min.clone();

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| weights[j].cmp(&weights[i]));

    let mut value: BigRational = weights
        .iter()
        .map(|w| w * params.mu_min.clone())
        .fold(BigRational::zero(), |acc, v| acc + v);
    for i in order {
        if budget <= BigRational::zero() {
            break;
        }
        let add = if budget < headroom { budget.clone() } else { headroom.clone() };
        value += weights[i].clone() * add.clone();
        budget -= add;
    }
    value
}

/// Maximal S_mu over all measurement-dependent local strategies, exact.
///
/// Linearity in both the hidden-value mixture and the input distribution
/// puts the maximum on a single deterministic strategy with an extremal
/// input distribution, so enumerating the 16 response pairs suffices.
pub fn lhv_max_smu(mu: &BigRational) -> Result<BigRational> {
    if mu < &BigRational::zero() || mu >= &half_rational() {
        return Err(Error::domain(format!("mu = {mu} outside [0, 0.5)")));
    }
    let params = MdlParams::new(mu.clone())?;
    let mut best: Option<BigRational> = None;
    for s in LhvStrategy::all() {
        let w = strategy_weights(&params, s);
        let v = maximize_over_inputs(&params, &w);
        best = Some(match best {
            Some(b) if b >= v => b,
            _ => v,
        });
    }
    Ok(best.unwrap())
}

/// [`lhv_max_smu`] on the exact dyadic rational equal to `mu`.
pub fn lhv_max_smu_f64(mu: f64) -> Result<BigRational> {
    lhv_max_smu(&rational_from_f64(mu)?)
}

/// Counter-based sampler for an LHV model. Two u64 draws per trial: one for
/// the hidden value, one for the inputs (joint mode) or unused (conditional
/// mode).
pub struct LhvSampler {
    /// Cumulative hidden-value weights.
    cum_lambda: Vec<f64>,
    /// Per hidden value, cumulative input distribution.
    cum_inputs: Vec<[f64; 4]>,
    /// Per input pair, cumulative posterior over hidden values.
    cum_posterior: [Vec<f64>; 4],
    strategies: Vec<LhvStrategy>,
    seed: u64,
}

impl LhvSampler {
    pub fn new<R: Real>(model: &LhvDeviceModel<R>) -> Result<Self> {
        model.validate()?;
        let k = model.components.len();
        let mut cum_lambda = Vec::with_capacity(k);
        let mut cum_inputs = Vec::with_capacity(k);
        let mut strategies = Vec::with_capacity(k);
        let mut acc = 0.0;
        for c in &model.components {
            acc += c.weight.to_f64().unwrap();
            cum_lambda.push(acc);
            let mut ci = [0.0f64; 4];
            let mut pacc = 0.0;
            for (i, &p) in c.input_probs.iter().enumerate() {
                pacc += p.to_f64().unwrap();
                ci[i] = pacc;
            }
            ci[3] = 1.0;
            cum_inputs.push(ci);
            strategies.push(c.strategy);
        }
        *cum_lambda.last_mut().unwrap() = 1.0;

        // posterior P(lambda | x, y) proportional to w(lambda) p(x,y|lambda)
        let mut cum_posterior: [Vec<f64>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for (xy, slot) in cum_posterior.iter_mut().enumerate() {
            let mut weights: Vec<f64> = model
                .components
                .iter()
                .map(|c| c.weight.to_f64().unwrap() * c.input_probs[xy].to_f64().unwrap())
                .collect();
            if weights.iter().sum::<f64>() <= 0.0 {
                // inputs the model never produces: fall back to the prior
                weights = model
                    .components
                    .iter()
                    .map(|c| c.weight.to_f64().unwrap())
                    .collect();
            }
            let total: f64 = weights.iter().sum();
            let mut acc = 0.0;
            let cum: Vec<f64> = weights
                .iter()
                .map(|w| {
                    acc += w / total;
                    acc
                })
                .collect();
            *slot = cum;
            if let Some(last) = slot.last_mut() {
                *last = 1.0;
            }
        }

        Ok(LhvSampler {
            cum_lambda,
            cum_inputs,
            cum_posterior,
            strategies,
            seed: model.seed,
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(DEVICE_STREAM);
        rng
    }

    pub const WORDS_PER_TRIAL: u128 = 4;

    fn pick(cum: &[f64], u: u64) -> usize {
        let v = u as f64 / 18_446_744_073_709_551_616.0;
        cum.iter().position(|&c| v < c).unwrap_or(cum.len() - 1)
    }

    /// Conditional interface: outcome for externally supplied inputs, with
    /// the hidden value drawn from its posterior given (x, y).
    pub fn outcome_from_draw(&self, draw: u64, x: bool, y: bool) -> (bool, bool) {
        let xy = (x as usize) << 1 | y as usize;
        let lambda = Self::pick(&self.cum_posterior[xy], draw);
        self.strategies[lambda].respond(x, y)
    }

    pub fn sample_trial(&self, i: u64, x: bool, y: bool) -> (bool, bool) {
        let mut rng = self.rng();
        rng.set_word_pos(Self::WORDS_PER_TRIAL * i as u128);
        self.outcome_from_draw(rng.next_u64(), x, y)
    }

    /// Joint interface: the hidden value and the (correlated) inputs are
    /// drawn together — the measurement-dependent adversary in full.
    pub fn joint_from_draws(&self, draw_lambda: u64, draw_xy: u64) -> Trial {
        let lambda = Self::pick(&self.cum_lambda, draw_lambda);
        let xy = Self::pick(&self.cum_inputs[lambda], draw_xy);
        let (x, y) = (xy & 2 != 0, xy & 1 != 0);
        let (a, b) = self.strategies[lambda].respond(x, y);
        Trial { x, y, a, b }
    }

    pub fn joint_trial(&self, i: u64) -> Trial {
        let mut rng = self.rng();
        rng.set_word_pos(Self::WORDS_PER_TRIAL * i as u128);
        let dl = rng.next_u64();
        let dxy = rng.next_u64();
        self.joint_from_draws(dl, dxy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_bound_is_exactly_zero() {
        for mu in [0.0, 0.0075, 0.05, 0.2] {
            let max = lhv_max_smu_f64(mu).unwrap();
            assert!(max.is_zero(), "mu = {mu}: max = {max}");
        }
    }

    #[test]
    fn bound_zero_across_envelope_sweep() {
        for k in 0..=25 {
            let mu = BigRational::new(BigInt::from(k), BigInt::from(100));
            assert!(lhv_max_smu(&mu).unwrap().is_zero(), "mu = {k}/100");
        }
    }

    #[test]
    fn greedy_matches_vertex_enumeration() {
        // Cross-check the greedy LP against explicit vertex enumeration:
        // all lower/upper patterns with one free coordinate.
        for mu_num in [0i64, 3, 75, 200, 499] {
            let mu = BigRational::new(BigInt::from(mu_num), BigInt::from(1000));
            let params = MdlParams::new(mu).unwrap();
            for s in LhvStrategy::all() {
                let w = strategy_weights(&params, s);
                let greedy = maximize_over_inputs(&params, &w);
                let mut best: Option<BigRational> = None;
                for pattern in 0..16u8 {
                    for free in 0..4usize {
                        let mut p = [
                            BigRational::zero(),
                            BigRational::zero(),
                            BigRational::zero(),
                            BigRational::zero(),
                        ];
                        let mut rest = BigRational::one();
                        for i in 0..4 {
                            if i != free {
                                p[i] = if pattern & (1 << i) != 0 {
                                    params.mu_max.clone()
                                } else {
                                    params.mu_min.clone()
                                };
                                rest -= p[i].clone();
                            }
                        }
                        if rest < params.mu_min || rest > params.mu_max {
                            continue;
                        }
                        p[free] = rest;
                        let v: BigRational = (0..4)
                            .map(|i| w[i].clone() * p[i].clone())
                            .fold(BigRational::zero(), |a, b| a + b);
                        best = Some(match best {
                            Some(b) if b >= v => b,
                            _ => v,
                        });
                    }
                }
                assert_eq!(greedy, best.unwrap(), "strategy {s:?}");
            }
        }
    }

    #[test]
    fn mu_domain_checked() {
        assert!(lhv_max_smu_f64(0.5).is_err());
        assert!(lhv_max_smu_f64(-0.01).is_err());
    }

    #[test]
    fn deterministic_strategy_always_responds_same() {
        let strategy = LhvStrategy { a: [false, false], b: [false, false] };
        let model = LhvDeviceModel::<f64>::deterministic(strategy, 5);
        let sampler = LhvSampler::new(&model).unwrap();
        for i in 0..100 {
            assert_eq!(sampler.sample_trial(i, i % 2 == 0, i % 3 == 0), (false, false));
            let t = sampler.joint_trial(i);
            assert!(!t.a && !t.b);
        }
    }

    #[test]
    fn joint_sampling_respects_input_distribution() {
        // single lambda with a biased input distribution
        let model = LhvDeviceModel::<f64> {
            components: vec![LhvComponent {
                weight: 1.0,
                strategy: LhvStrategy { a: [false, true], b: [false, false] },
                input_probs: [0.2575, 0.2575, 0.2425, 0.2425],
            }],
            seed: 9,
        };
        model.validate_envelope(0.001).unwrap_err(); // envelope too tight
        model.validate_envelope(0.1).unwrap();
        let sampler = LhvSampler::new(&model).unwrap();
        let n = 200_000;
        let mut count_x0 = 0u64;
        for i in 0..n {
            let t = sampler.joint_trial(i);
            if !t.x {
                count_x0 += 1;
            }
            assert_eq!(t.a, t.x); // a(x) = x for this strategy
        }
        let p = count_x0 as f64 / n as f64;
        assert!((p - 0.515).abs() < 0.005, "p(x=0) = {p}");
    }

    #[test]
    fn model_validation_rejects_bad_distributions() {
        let bad = LhvDeviceModel::<f64> {
            components: vec![LhvComponent {
                weight: 1.0,
                strategy: LhvStrategy { a: [false, false], b: [false, false] },
                input_probs: [0.5, 0.5, 0.5, 0.5],
            }],
            seed: 0,
        };
        assert!(bad.validate().is_err());
    }
}
