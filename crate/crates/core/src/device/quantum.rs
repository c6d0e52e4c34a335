//! Depolarized entangled-pair model.
//!
//! State: `V * |Psi+><Psi+| + (1 - V)/4 * I` with `|Psi+> = (|01> + |10>)/sqrt(2)`.
//! Each node measures `cos(theta) sigma_z + sin(theta) sigma_x` at one angle
//! per input, outcome 0 mapped to the +1 eigenvalue, followed by an
//! independent classical readout flip per node.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequality::{s_mu_combination, MdlParams};
use crate::real::Real;

/// RNG stream id reserved for device draws.
pub const DEVICE_STREAM: u64 = 0x44;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumDeviceModel<R> {
    /// Depolarizing weight on the ideal Bell state, in [0, 1].
    pub visibility: R,
    /// Measurement angles (radians) for inputs x = 0, 1 at node A.
    pub theta_a: [R; 2],
    /// Measurement angles (radians) for inputs y = 0, 1 at node B.
    pub theta_b: [R; 2],
    /// Readout flip probability at node A, in [0, 0.5].
    pub flip_a: R,
    /// Readout flip probability at node B, in [0, 0.5].
    pub flip_b: R,
    pub seed: u64,
}

impl<R: Real> QuantumDeviceModel<R> {
    /// Symmetric CHSH-optimal configuration: every correlator equals
    /// `V/sqrt(2)` in magnitude, `S = 2*sqrt(2)*V`, and the Eberhard cells
    /// take the form `(1 +/- V/sqrt(2))/4`.
    pub fn symmetric(visibility: R) -> Self {
        let pi = R::of(std::f64::consts::PI);
        let three_quarter = R::of(0.75);
        QuantumDeviceModel {
            visibility,
            theta_a: [three_quarter * pi, -three_quarter * pi],
            theta_b: [R::zero(), R::half() * pi],
            flip_a: R::zero(),
            flip_b: R::zero(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_flips(mut self, flip_a: R, flip_b: R) -> Self {
        self.flip_a = flip_a;
        self.flip_b = flip_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.visibility >= R::zero() && self.visibility <= R::one()) {
            return Err(Error::domain(format!(
                "visibility {} outside [0, 1]",
                self.visibility
            )));
        }
        for f in [self.flip_a, self.flip_b] {
            if !(f >= R::zero() && f <= R::half()) {
                return Err(Error::domain(format!("flip probability {f} outside [0, 0.5]")));
            }
        }
        Ok(())
    }
}

/// 2x2 projector onto outcome `a` of `cos(t) sigma_z + sin(t) sigma_x`.
fn projector<R: Real>(theta: R, outcome: bool) -> [[R; 2]; 2] {
    let s = if outcome { -R::one() } else { R::one() };
    let (c, sn) = (theta.cos(), theta.sin());
    let h = R::half();
    [
        [h * (R::one() + s * c), h * s * sn],
        [h * s * sn, h * (R::one() - s * c)],
    ]
}

/// Outcome probabilities p(a, b | x, y), order (0,0), (0,1), (1,0), (1,1).
pub fn born_probabilities<R: Real>(
    model: &QuantumDeviceModel<R>,
    x: bool,
    y: bool,
) -> Result<[R; 4]> {
    model.validate()?;
    let v = model.visibility;
    let quarter = R::of(0.25);
    let half = R::half();

    // rho = V |Psi+><Psi+| + (1-V)/4 I, basis order |00>, |01>, |10>, |11>
    let psi = [R::zero(), half.sqrt(), half.sqrt(), R::zero()];
    let mut rho = [[R::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = v * psi[i] * psi[j];
        }
        rho[i][i] = rho[i][i] + (R::one() - v) * quarter;
    }

    let ta = model.theta_a[x as usize];
    let tb = model.theta_b[y as usize];
    let mut ideal = [R::zero(); 4];
    for a in [false, true] {
        for b in [false, true] {
            let pa = projector(ta, a);
            let pb = projector(tb, b);
            // Tr(rho (Pa x Pb)) with (Pa x Pb)[2i+j][2k+l] = Pa[i][k] Pb[j][l]
            let mut tr = R::zero();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            tr = tr + rho[2 * i + j][2 * k + l] * pa[k][i] * pb[l][j];
                        }
                    }
                }
            }
            ideal[(a as usize) << 1 | b as usize] = tr;
        }
    }

    // independent readout flip channels
    let (fa, fb) = (model.flip_a, model.flip_b);
    let keep = |f: R, flip: bool| if flip { f } else { R::one() - f };
    let mut out = [R::zero(); 4];
    for a in 0..2usize {
        for b in 0..2usize {
            let mut p = R::zero();
            for a0 in 0..2usize {
                for b0 in 0..2usize {
                    p = p + ideal[a0 << 1 | b0] * keep(fa, a != a0) * keep(fb, b != b0);
                }
            }
            out[a << 1 | b] = p;
        }
    }
    Ok(out)
}

/// Correlator E_xy = sum_ab (-1)^(a+b) p(a, b | x, y).
fn correlator<R: Real>(p: &[R; 4]) -> R {
    p[0] - p[1] - p[2] + p[3]
}

/// Analytic (S, S_mu) assuming uniform input sampling p(x, y) = 1/4.
pub fn expected_values<R: Real>(model: &QuantumDeviceModel<R>, mu: R) -> Result<(R, R)> {
    let params = MdlParams::new(mu)?;
    let quarter = R::of(0.25);
    let mut e = [[R::zero(); 2]; 2];
    let mut joint = [[R::zero(); 4]; 4]; // [xy][ab] / 4
    for (xi, x) in [false, true].into_iter().enumerate() {
        for (yi, y) in [false, true].into_iter().enumerate() {
            let p = born_probabilities(model, x, y)?;
            e[xi][yi] = correlator(&p);
            for ab in 0..4 {
                joint[xi << 1 | yi][ab] = p[ab] * quarter;
            }
        }
    }
    let s = e[0][0] + e[0][1] + e[1][0] - e[1][1];
    let s_mu = s_mu_combination(
        &params,
        joint[0b00][0b00], // (a,b,x,y) = (0,0,0,0)
        joint[0b01][0b01], // (0,1,0,1)
        joint[0b10][0b10], // (1,0,1,0)
        joint[0b11][0b00], // (0,0,1,1)
    );
    Ok((s, s_mu))
}

/// Visibility of the symmetric model reaching `target_s`, by bisection to
/// |S - target| <= 1e-9. Valid targets lie in (2, 2*sqrt(2)].
pub fn calibrate_visibility<R: Real>(target_s: R) -> Result<R> {
    let tsirelson = R::two() * R::two().sqrt();
    if !(target_s > R::two() && target_s <= tsirelson + R::of(1e-12)) {
        return Err(Error::domain(format!(
            "target S = {target_s} outside (2, 2*sqrt(2)]"
        )));
    }
    let s_of = |v: R| -> Result<R> {
        Ok(expected_values(&QuantumDeviceModel::symmetric(v), R::zero())?.0)
    };
    let (mut lo, mut hi) = (R::zero(), R::one());
    let tol = R::of(1e-9);
    for _ in 0..200 {
        let mid = (lo + hi) * R::half();
        let s = s_of(mid)?;
        if (s - target_s).abs() <= tol {
            return Ok(mid);
        }
        if s < target_s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < R::of(1e-15) {
            break;
        }
    }
    Ok((lo + hi) * R::half())
}

/// Counter-based trial sampler: outcome depends only on (seed, trial index).
pub struct QuantumTrialSampler {
    /// Cumulative outcome thresholds per input pair, index x<<1|y.
    cum: [[f64; 4]; 4],
    seed: u64,
}

impl QuantumTrialSampler {
    pub fn new<R: Real>(model: &QuantumDeviceModel<R>) -> Result<Self> {
        let mut cum = [[0.0f64; 4]; 4];
        for (xi, x) in [false, true].into_iter().enumerate() {
            for (yi, y) in [false, true].into_iter().enumerate() {
                let p = born_probabilities(model, x, y)?;
                let mut acc = 0.0f64;
                for ab in 0..4 {
                    acc += p[ab].to_f64().unwrap();
                    cum[xi << 1 | yi][ab] = acc;
                }
                cum[xi << 1 | yi][3] = 1.0;
            }
        }
        Ok(QuantumTrialSampler { cum, seed: model.seed })
    }

    /// Base RNG for a worker; position at `2 * trial_index` words before use.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(DEVICE_STREAM);
        rng
    }

    /// Words of RNG stream consumed per trial.
    pub const WORDS_PER_TRIAL: u128 = 2;

    /// Pure outcome selection from a uniform u64 draw.
    pub fn outcome_from_draw(&self, draw: u64, x: bool, y: bool) -> (bool, bool) {
        let u = draw as f64 / 18_446_744_073_709_551_616.0;
        let row = &self.cum[(x as usize) << 1 | y as usize];
        let ab = row.iter().position(|&c| u < c).unwrap_or(3);
        (ab & 2 != 0, ab & 1 != 0)
    }

    /// Outcome of trial `i` on inputs (x, y).
    pub fn sample_trial(&self, i: u64, x: bool, y: bool) -> (bool, bool) {
        let mut rng = self.rng();
        rng.set_word_pos(Self::WORDS_PER_TRIAL * i as u128);
        self.outcome_from_draw(rng.next_u64(), x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn invalid_parameters_rejected() {
        let mut model = QuantumDeviceModel::symmetric(1.5f64);
        assert!(born_probabilities(&model, false, false).is_err());
        model.visibility = -0.1;
        assert!(born_probabilities(&model, false, false).is_err());
        model.visibility = 0.9;
        model.flip_a = 0.6;
        assert!(born_probabilities(&model, false, false).is_err());
    }

    #[test]
    fn fully_depolarized_is_uniform() {
        let model = QuantumDeviceModel::symmetric(0.0f64);
        for x in [false, true] {
            for y in [false, true] {
                let p = born_probabilities(&model, x, y).unwrap();
                for v in p {
                    assert!((v - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ideal_state_agreement_cells() {
        let model = QuantumDeviceModel::symmetric(1.0f64);
        let p = born_probabilities(&model, false, false).unwrap();
        let hi = (1.0 + INV_SQRT2) / 4.0;
        let lo = (1.0 - INV_SQRT2) / 4.0;
        assert!((p[0b00] - hi).abs() < 1e-12, "p00 = {}", p[0]);
        assert!((p[0b11] - hi).abs() < 1e-12);
        assert!((p[0b01] - lo).abs() < 1e-12);
        assert!((p[0b10] - lo).abs() < 1e-12);
    }

    #[test]
    fn visibility_scales_agreement_cell() {
        let model = QuantumDeviceModel::symmetric(0.8030f64);
        let p = born_probabilities(&model, false, false).unwrap();
        assert!((p[0b00] - (1.0 + 0.8030 * INV_SQRT2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_normalized_for_random_models() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10_000 {
            let model = QuantumDeviceModel::<f64> {
                visibility: rng.gen::<f64>(),
                theta_a: [rng.gen::<f64>() * 7.0 - 3.5, rng.gen::<f64>() * 7.0 - 3.5],
                theta_b: [rng.gen::<f64>() * 7.0 - 3.5, rng.gen::<f64>() * 7.0 - 3.5],
                flip_a: rng.gen::<f64>() * 0.5,
                flip_b: rng.gen::<f64>() * 0.5,
                seed: 0,
            };
            for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
                let p = born_probabilities(&model, x, y).unwrap();
                let sum: f64 = p.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|&v| v >= -1e-15));
            }
        }
    }

    #[test]
    fn tsirelson_point() {
        let model = QuantumDeviceModel::symmetric(1.0f64);
        let (s, _) = expected_values(&model, 0.0).unwrap();
        assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9, "S = {s}");
    }

    #[test]
    fn operating_point_s_2_271() {
        let model = QuantumDeviceModel::symmetric(0.802956f64);
        let (s, s_mu) = expected_values(&model, 0.0075).unwrap();
        assert!((s - 2.271).abs() < 1e-3, "S = {s}");
        // mu_min*(1+V/sqrt2)/16 - 3*mu_max*(1-V/sqrt2)/16
        let v = 0.802956 * INV_SQRT2;
        let expected = 0.24255625 * (1.0 + v) / 16.0 - 3.0 * 0.25755625 * (1.0 - v) / 16.0;
        assert!((s_mu - expected).abs() < 1e-12);
        assert!((s_mu - 0.00289).abs() < 2e-5, "S_mu = {s_mu}");
    }

    #[test]
    fn flips_shrink_s() {
        let clean = QuantumDeviceModel::symmetric(1.0f64);
        let noisy = clean.clone().with_flips(0.02, 0.02);
        let (s0, _) = expected_values(&clean, 0.0).unwrap();
        let (s1, _) = expected_values(&noisy, 0.0).unwrap();
        // E scales by (1-2f)^2
        assert!((s1 - s0 * (1.0f64 - 0.04).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn global_outcome_relabel_preserves_s() {
        // shifting every angle by pi maps p(a,b) -> p(1-a,1-b)
        let pi = std::f64::consts::PI;
        let base = QuantumDeviceModel::symmetric(0.9f64);
        let mut relabeled = base.clone();
        for t in relabeled.theta_a.iter_mut().chain(relabeled.theta_b.iter_mut()) {
            *t += pi;
        }
        let (s0, _) = expected_values(&base, 0.0).unwrap();
        let (s1, _) = expected_values(&relabeled, 0.0).unwrap();
        assert!((s0 - s1).abs() < 1e-9);
        let p = born_probabilities(&base, true, false).unwrap();
        let q = born_probabilities(&relabeled, true, false).unwrap();
        assert!((p[0b00] - q[0b11]).abs() < 1e-12);
        assert!((p[0b01] - q[0b10]).abs() < 1e-12);
    }

    #[test]
    fn ideal_device_violates_below_raw_threshold() {
        // V = 1 keeps S_mu > 0 well past the V = 0.803 threshold of 0.0237
        let model = QuantumDeviceModel::symmetric(1.0f64);
        for mu in [0.0, 0.005, 0.0075, 0.015, 0.0236] {
            let (_, s_mu) = expected_values(&model, mu).unwrap();
            assert!(s_mu > 0.0, "mu = {mu}: S_mu = {s_mu}");
        }
    }

    #[test]
    fn calibration_examples() {
        let v = calibrate_visibility(2.0 * std::f64::consts::SQRT_2).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "v = {v}");
        let v = calibrate_visibility(2.271f64).unwrap();
        assert!((v - 0.8030).abs() < 5e-4, "v = {v}");
        // S(V) = 2*sqrt(2)*V for the symmetric model
        assert!((v - 2.271 / (2.0 * std::f64::consts::SQRT_2)).abs() < 1e-8);
        assert!(calibrate_visibility(2.0f64).is_err());
        assert!(calibrate_visibility(2.9f64).is_err());
    }

    #[test]
    fn sampler_is_counter_deterministic() {
        let model = QuantumDeviceModel::symmetric(0.9f64).with_seed(1234);
        let sampler = QuantumTrialSampler::new(&model).unwrap();
        for i in [0u64, 1, 17, 100_000] {
            assert_eq!(
                sampler.sample_trial(i, true, false),
                sampler.sample_trial(i, true, false)
            );
        }
        // sequential streaming matches per-index positioning
        let mut rng = sampler.rng();
        rng.set_word_pos(0);
        for i in 0..64u64 {
            let direct = sampler.sample_trial(i, false, true);
            let streamed = sampler.outcome_from_draw(rng.next_u64(), false, true);
            assert_eq!(direct, streamed);
        }
    }

    #[test]
    fn empirical_agreement_cell_at_v1() {
        let model = QuantumDeviceModel::symmetric(1.0f64).with_seed(77);
        let sampler = QuantumTrialSampler::new(&model).unwrap();
        let n = 1_000_000u64;
        let mut rng = sampler.rng();
        rng.set_word_pos(0);
        let mut count00 = 0u64;
        for _ in 0..n {
            let (a, b) = sampler.outcome_from_draw(rng.next_u64(), false, false);
            if !a && !b {
                count00 += 1;
            }
        }
        let p = count00 as f64 / n as f64;
        let target = (1.0 + INV_SQRT2) / 4.0;
        let sigma = (target * (1.0 - target) / n as f64).sqrt();
        assert!((p - target).abs() < 4.0 * sigma, "p = {p}, target = {target}");
    }
}
