//! Santha-Vazirani source models.
//!
//! A μ-SV source emits bits whose conditional probability of 1, given all
//! previous output and side information, stays within [1/2 − μ, 1/2 + μ].
//! Each strategy here respects that envelope by construction; `mu = 0` is a
//! uniform source. Two physical sources are realized as one model producing
//! the merged stream in acquisition order.

use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstore::{read_bits_file, BitString};
use crate::error::{Error, Result};
use crate::real::Real;

/// RNG stream id reserved for source draws.
pub const SV_STREAM: u64 = 0x53;

/// How the bits are produced within the SV envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SvStrategy<R> {
    /// Independent bits with fixed bias: P(1) = 1/2 + delta, |delta| <= mu.
    IidBias { delta: R },
    /// Worst-case-style adversary: biases every bit toward the running
    /// parity of the history, sitting at the envelope edge 1/2 + mu.
    AdaptiveAdversary,
    /// Replays a recorded `RABITS01` file.
    FileBacked { path: PathBuf },
}

/// A μ-SV source model: bias envelope, strategy, and reproducibility seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvModel<R> {
    pub mu: R,
    pub strategy: SvStrategy<R>,
    pub seed: u64,
}

impl<R: Real> SvModel<R> {
    pub fn validate(&self) -> Result<()> {
        if !(R::zero()..=R::half()).contains(&self.mu) {
            return Err(Error::domain(format!("mu = {} outside [0, 0.5]", self.mu)));
        }
        if let SvStrategy::IidBias { delta } = self.strategy {
            if delta.abs() > self.mu || delta.is_nan() {
                return Err(Error::domain(format!(
                    "|delta| = {} exceeds mu = {}",
                    delta.abs(),
                    self.mu
                )));
            }
        }
        Ok(())
    }
}

enum SourceState {
    Generative { rng: ChaCha8Rng, parity: bool },
    Replay { bits: BitString, cursor: u64 },
}

/// Stateful sequential sampler for an [`SvModel`].
///
/// Deterministic given (model, seed); repeated `sample_bits` calls continue
/// the stream. Concurrent use requires independent instances.
pub struct SvSampler<R> {
    model: SvModel<R>,
    state: SourceState,
    emitted: u64,
}

impl<R: Real> SvSampler<R> {
    pub fn new(model: SvModel<R>) -> Result<Self> {
        model.validate()?;
        let state = match &model.strategy {
            SvStrategy::FileBacked { path } => SourceState::Replay {
                bits: read_bits_file(path)?,
                cursor: 0,
            },
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
                rng.set_stream(SV_STREAM);
                SourceState::Generative { rng, parity: false }
            }
        };
        Ok(SvSampler { model, state, emitted: 0 })
    }

    /// Total bits emitted so far (for bit accounting).
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Conditional P(next bit = 1) under the current history.
    fn next_p1(&self) -> R {
        match (&self.model.strategy, &self.state) {
            (SvStrategy::IidBias { delta }, _) => R::half() + *delta,
            (SvStrategy::AdaptiveAdversary, SourceState::Generative { parity, .. }) => {
                if *parity {
                    R::half() + self.model.mu
                } else {
                    R::half() - self.model.mu
                }
            }
            (SvStrategy::FileBacked { .. }, SourceState::Replay { bits, cursor }) => {
                if *cursor < bits.len() && bits.get(*cursor) {
                    R::one()
                } else {
                    R::zero()
                }
            }
            _ => unreachable!("strategy/state mismatch"),
        }
    }

    fn draw(&mut self, p1: R) -> Result<bool> {
        match &mut self.state {
            SourceState::Generative { rng, parity } => {
                let u = rng.next_u64();
                let threshold = (p1.to_f64().unwrap() * 18_446_744_073_709_551_616.0) as u128;
                let bit = (u as u128) < threshold;
                *parity ^= bit;
                Ok(bit)
            }
            SourceState::Replay { bits, cursor } => {
                if *cursor >= bits.len() {
                    return Err(Error::SourceUnderflow { needed: 1, available: 0 });
                }
                let bit = bits.get(*cursor);
                *cursor += 1;
                Ok(bit)
            }
        }
    }

    pub fn sample_bits(&mut self, count: u64) -> Result<BitString> {
        if let SourceState::Replay { bits, cursor } = &self.state {
            let available = bits.len() - cursor;
            if count > available {
                return Err(Error::SourceUnderflow { needed: count, available });
            }
        }
        let mut out = BitString::zeros(count);
        for j in 0..count {
            let p1 = self.next_p1();
            if self.draw(p1)? {
                out.set(j, true);
            }
        }
        self.emitted += count;
        Ok(out)
    }

    /// As [`sample_bits`](Self::sample_bits), also returning the per-bit
    /// conditional probability of 1 (the SV envelope witness).
    pub fn sample_bits_traced(&mut self, count: u64) -> Result<(BitString, Vec<R>)> {
        let mut out = BitString::zeros(count);
        let mut trace = Vec::with_capacity(count as usize);
        for j in 0..count {
            let p1 = self.next_p1();
            trace.push(p1);
            if self.draw(p1)? {
                out.set(j, true);
            }
        }
        self.emitted += count;
        Ok((out, trace))
    }
}

/// Min-entropy guaranteed by a μ-SV source over `d` bits:
/// `-d * log2(1/2 + mu)`. Logs are base 2 throughout the crate.
pub fn sv_minentropy_bound<R: Real>(d: u64, mu: R) -> Result<R> {
    if !(mu >= R::zero() && mu <= R::half()) {
        return Err(Error::domain(format!("mu = {} outside [0, 0.5]", mu)));
    }
    Ok(-R::of_u64(d) * (R::half() + mu).log2())
}

/// Advisory empirical check of a bit string against a claimed envelope.
///
/// The SV property is about the generation process and cannot be certified
/// statistically; this only flags gross violations (empirical window means
/// outside [1/2 - mu, 1/2 + mu] beyond a 5-sigma binomial allowance).
#[derive(Clone, Debug, Serialize)]
pub struct BiasAudit {
    pub bits: u64,
    pub mean: f64,
    pub window_bits: u64,
    pub windows: u64,
    pub max_window_deviation: f64,
    pub allowance_sigma: f64,
    pub pass: bool,
}

pub fn bias_audit<R: Real>(bits: &BitString, mu: R) -> Result<BiasAudit> {
    if bits.is_empty() {
        return Err(Error::domain("bias audit requires a nonempty bit string"));
    }
    let mu = mu.to_f64().unwrap();
    if !(0.0..=0.5).contains(&mu) {
        return Err(Error::domain(format!("mu = {mu} outside [0, 0.5]")));
    }
    let n = bits.len();
    let sigmas = 5.0;
    let window_bits = n.min(65_536);

    let mut pass = true;
    let mut max_dev: f64 = 0.0;
    let mut windows = 0u64;
    let mut lo = 0u64;
    while lo < n {
        let hi = (lo + window_bits).min(n);
        let w = hi - lo;
        if w < window_bits / 2 && windows > 0 {
            break; // fold a short tail into the global check only
        }
        let ones = (lo..hi).filter(|&j| bits.get(j)).count() as f64;
        let dev = (ones / w as f64 - 0.5).abs();
        max_dev = max_dev.max(dev);
        // binomial sd at p ~ 1/2
        if dev > mu + sigmas * 0.5 / (w as f64).sqrt() {
            pass = false;
        }
        windows += 1;
        lo = hi;
    }

    let mean = bits.count_ones() as f64 / n as f64;
    if (mean - 0.5).abs() > mu + sigmas * 0.5 / (n as f64).sqrt() {
        pass = false;
    }

    Ok(BiasAudit {
        bits: n,
        mean,
        window_bits,
        windows,
        max_window_deviation: max_dev,
        allowance_sigma: sigmas,
        pass,
    })
}
