//! Benchmark states and finite-statistics measurement simulation.
//!
//! Shot noise is i.i.d. multinomial sampling of outcomes. Counts are drawn
//! with sequential binomials, so the cost of a trial does not depend on the
//! number of shots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::noise::{spin1_povms, spin_flip_povms};
use crate::operators::{DensityMatrix, MomentPair, Povm, PureState, QuantumState};

/// `(|02⟩ + |20⟩ − |11⟩)/√3` on two qutrits, index `3a + b`.
pub fn make_singlet() -> PureState {
    let s = 1.0 / 3f64.sqrt();
    let mut amps = vec![C64::new(0.0, 0.0); 9];
    amps[2] = C64::new(s, 0.0);
    amps[6] = C64::new(s, 0.0);
    amps[4] = C64::new(-s, 0.0);
    PureState::new(amps).expect("unit vector")
}

/// Calibration state angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestStateParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl TestStateParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1.is_finite() && theta2.is_finite()) {
            return Err(Error::InvalidParameter("angles must be finite".into()));
        }
        Ok(Self { theta1, theta2 })
    }
}

/// `sinθ₁cosθ₂|0⟩ + cosθ₁|1⟩ + sinθ₁sinθ₂|2⟩`.
pub fn make_test_state(params: TestStateParams) -> PureState {
    let (t1, t2) = (params.theta1.to_radians(), params.theta2.to_radians());
    let amps = [t1.sin() * t2.cos(), t1.cos(), t1.sin() * t2.sin()];
    PureState::new(amps.iter().map(|&a| C64::new(a, 0.0)).collect()).expect("unit vector")
}

/// Fixed `θ₂` used for the θ₁ sweep.
pub const SWEEP_THETA2_DEG: f64 = 23.3;
/// Fixed `θ₁` used for the θ₂ sweep.
pub const SWEEP_THETA1_DEG: f64 = 28.0;
pub const SWEEP_STEPS: usize = 45;

/// `steps` cell midpoints `(k + ½)·180°/steps`, strictly inside `(0°, 180°)`.
fn sweep_angles(steps: usize) -> impl Iterator<Item = f64> {
    (0..steps).map(move |k| (k as f64 + 0.5) * 180.0 / steps as f64)
}

pub fn theta1_sweep(steps: usize, theta2: f64) -> Vec<TestStateParams> {
    sweep_angles(steps)
        .map(|t| TestStateParams { theta1: t, theta2 })
        .collect()
}

pub fn theta2_sweep(steps: usize, theta1: f64) -> Vec<TestStateParams> {
    sweep_angles(steps)
        .map(|t| TestStateParams { theta1, theta2: t })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointOutcome {
    pub x_a: f64,
    pub x_b: f64,
    pub probability: f64,
}

/// `p(x_a, x_b) = tr(ρ · P_a(x_a) ⊗ P_b(x_b))`.
pub fn joint_outcome_distribution<S: QuantumState + ?Sized>(
    state: &S,
    povm_a: &Povm,
    povm_b: &Povm,
) -> Result<Vec<JointOutcome>> {
    let dim = povm_a.dim() * povm_b.dim();
    if state.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: state.dim(),
        });
    }
    let mut out = Vec::with_capacity(povm_a.len() * povm_b.len());
    for (x_a, pa) in povm_a.iter() {
        for (x_b, pb) in povm_b.iter() {
            let p = crate::operators::expectation(state, &crate::operators::tensor(pa, pb))?;
            out.push(JointOutcome {
                x_a,
                x_b,
                probability: p.max(0.0),
            });
        }
    }
    Ok(out)
}

/// Distribution of a scalar outcome; values closer than `tol` are merged.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>, tol: f64) -> Self {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.1 > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        for (v, p) in pairs {
            match values.last() {
                Some(&last) if (v - last).abs() <= tol => *probabilities.last_mut().unwrap() += p,
                _ => {
                    values.push(v);
                    probabilities.push(p);
                }
            }
        }
        Self {
            values,
            probabilities,
        }
    }

    pub fn local<S: QuantumState + ?Sized>(state: &S, povm: &Povm) -> Result<Self> {
        let probs = povm.probabilities(state)?;
        Ok(Self::from_pairs(
            povm.outcomes().iter().copied().zip(probs),
            OUTCOME_MERGE_TOL,
        ))
    }

    /// Distribution of `x_a + x_b`.
    pub fn summed(joint: &[JointOutcome]) -> Self {
        Self::from_pairs(
            joint.iter().map(|o| (o.x_a + o.x_b, o.probability)),
            OUTCOME_MERGE_TOL,
        )
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| v * p)
            .sum::<f64>()
            / self.probabilities.iter().sum::<f64>()
    }

    /// Multinomial counts for `shots` draws.
    pub fn sample_counts<R: rand::Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> Vec<u64> {
        let mut remaining = shots;
        let mut mass: f64 = self.probabilities.iter().sum();
        let last = self.probabilities.len() - 1;
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                if k == last || remaining == 0 {
                    let c = if k == last { remaining } else { 0 };
                    remaining -= c;
                    return c;
                }
                let q = (p / mass).clamp(0.0, 1.0);
                let c = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
                remaining -= c;
                mass -= p;
                c
            })
            .collect()
    }

    /// Unbiased sample variance of one simulated run of `shots` draws.
    pub fn sample_variance<R: rand::Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> f64 {
        let counts = self.sample_counts(shots, rng);
        unbiased_variance(&self.values, &counts)
    }
}

const OUTCOME_MERGE_TOL: f64 = 1e-9;

/// Sample variance with `n − 1` denominator from outcome counts. Values are
/// shifted by the first occupied outcome so a point mass gives exactly 0.
pub fn unbiased_variance(values: &[f64], counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let Some(k0) = counts.iter().position(|&c| c > 0) else {
        return f64::NAN;
    };
    let shift = values[k0];
    let (mut s1, mut s2) = (0.0, 0.0);
    for (v, &c) in values.iter().zip(counts) {
        let d = v - shift;
        s1 += c as f64 * d;
        s2 += c as f64 * d * d;
    }
    let n = n as f64;
    ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub shots: u64,
    pub seed: u64,
    pub trials: usize,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<u64> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        let per_setting = self.shots / 2;
        if per_setting < 2 {
            return Err(Error::InvalidParameter(format!(
                "{} shots leave {per_setting} per setting; at least 2 are needed",
                self.shots
            )));
        }
        Ok(per_setting)
    }
}

/// Trial `t` of task `task` draws from stream `(task << 32) | t`.
fn trial_rng(seed: u64, task: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((task << 32) | trial as u64);
    rng
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSample {
    /// Mean over trials of the sampled `Δ²M_X`.
    pub d2x: f64,
    pub d2y: f64,
    pub d2x_std: f64,
    pub d2y_std: f64,
    /// Per-trial `(Δ²M_X, Δ²M_Y)`.
    pub trials: Vec<(f64, f64)>,
}

/// Simulates measuring the total-outcome variances of both settings with
/// `shots / 2` coincidences each.
pub fn sample_variance_tuple<S: QuantumState + ?Sized>(
    state: &S,
    povm_xa: &Povm,
    povm_xb: &Povm,
    povm_ya: &Povm,
    povm_yb: &Povm,
    config: &SampleConfig,
) -> Result<VarianceSample> {
    let per_setting = config.validate()?;
    let dist_x = OutcomeDistribution::summed(&joint_outcome_distribution(state, povm_xa, povm_xb)?);
    let dist_y = OutcomeDistribution::summed(&joint_outcome_distribution(state, povm_ya, povm_yb)?);
    let trials: Vec<(f64, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, 0, t);
            let vx = dist_x.sample_variance(per_setting, &mut rng);
            let vy = dist_y.sample_variance(per_setting, &mut rng);
            (vx, vy)
        })
        .collect();
    let (d2x, d2x_std) = mean_std(&trials.iter().map(|t| t.0).collect::<Vec<_>>());
    let (d2y, d2y_std) = mean_std(&trials.iter().map(|t| t.1).collect::<Vec<_>>());
    Ok(VarianceSample {
        d2x,
        d2y,
        d2x_std,
        d2y_std,
        trials,
    })
}

/// Per-trial sampled `λ Δ²X + μ Δ²Y` for a single party.
pub fn sample_local_v<S: QuantumState + ?Sized>(
    state: &S,
    povm_x: &Povm,
    povm_y: &Povm,
    weights: (f64, f64),
    config: &SampleConfig,
    task: u64,
) -> Result<Vec<f64>> {
    let per_setting = config.validate()?;
    let dx = OutcomeDistribution::local(state, povm_x)?;
    let dy = OutcomeDistribution::local(state, povm_y)?;
    Ok((0..config.trials)
        .map(|t| {
            let mut rng = trial_rng(config.seed, task, t);
            let vx = dx.sample_variance(per_setting, &mut rng);
            let vy = dy.sample_variance(per_setting, &mut rng);
            weights.0 * vx + weights.1 * vy
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub params: TestStateParams,
    #[serde(rename = "V_ideal")]
    pub v_ideal: f64,
    #[serde(rename = "V_noisy")]
    pub v_noisy: f64,
    #[serde(rename = "V_sampled_mean")]
    pub v_sampled_mean: f64,
    #[serde(rename = "V_sampled_std")]
    pub v_sampled_std: f64,
}

/// `½ Δ²X + ½ Δ²Y` on a pure state.
fn half_sum(x: &MomentPair, y: &MomentPair, s: &PureState) -> Result<f64> {
    Ok(0.5 * x.variance(s)? + 0.5 * y.variance(s)?)
}

/// Exact ideal and noisy `V` at `λ = μ = ½` for each test state, plus the
/// mean and spread of `V` sampled from the noisy detectors.
pub fn run_calibration(
    sweep: &[TestStateParams],
    alpha: f64,
    config: &SampleConfig,
) -> Result<Vec<CalibrationRecord>> {
    if sweep.is_empty() {
        return Err(Error::InvalidParameter("calibration sweep is empty".into()));
    }
    config.validate()?;
    let (ix, iy) = spin1_povms();
    let (nx, ny) = spin_flip_povms(alpha)?;
    let (ix_m, iy_m) = (ix.moment_pair()?, iy.moment_pair()?);
    let (nx_m, ny_m) = (nx.moment_pair()?, ny.moment_pair()?);
    sweep
        .par_iter()
        .enumerate()
        .map(|(r, &params)| {
            let psi = make_test_state(params);
            let sampled = sample_local_v(&psi, &nx, &ny, (0.5, 0.5), config, r as u64 + 1)?;
            let (mean, std) = mean_std(&sampled);
            Ok(CalibrationRecord {
                params,
                v_ideal: half_sum(&ix_m, &iy_m, &psi)?,
                v_noisy: half_sum(&nx_m, &ny_m, &psi)?,
                v_sampled_mean: mean,
                v_sampled_std: std,
            })
        })
        .collect()
}

/// Convenience: the singlet as a density matrix.
pub fn singlet_density() -> DensityMatrix {
    make_singlet().to_density()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn singlet_shape() {
        let s = make_singlet();
        assert_abs_diff_eq!(crate::linalg::norm(s.amplitudes()), 1.0, epsilon = 1e-15);
        let rho = s.to_density();
        let red = rho.reduce_first(3).unwrap();
        let mixed = DensityMatrix::maximally_mixed(3);
        assert!((red.operator().matrix() - mixed.operator().matrix()).max_abs() < 1e-15);
        let red = rho.reduce_second(3).unwrap();
        assert!((red.operator().matrix() - mixed.operator().matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn test_state_examples() {
        let s = make_test_state(TestStateParams::new(0.0, 17.0).unwrap());
        assert_abs_diff_eq!(s.amplitudes()[1].re, 1.0);
        let s = make_test_state(TestStateParams::new(90.0, 0.0).unwrap());
        assert_abs_diff_eq!(s.amplitudes()[0].re, 1.0);
        let s = make_test_state(TestStateParams::new(90.0, 45.0).unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amplitudes()[0].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[2].re, h, epsilon = 1e-15);
        assert!(TestStateParams::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn sweep_is_strictly_inside() {
        let s = theta1_sweep(SWEEP_STEPS, SWEEP_THETA2_DEG);
        assert_eq!(s.len(), 45);
        assert!(s.iter().all(|p| p.theta1 > 0.0 && p.theta1 < 180.0 && p.theta2 == 23.3));
        assert_abs_diff_eq!(s[1].theta1 - s[0].theta1, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn unbiased_variance_matches_formula() {
        // data {1, 1, 3}: mean 5/3, sample variance 4/3
        assert_abs_diff_eq!(unbiased_variance(&[1.0, 3.0], &[2, 1]), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(unbiased_variance(&[0.1, 0.7], &[0, 10]), 0.0);
    }

    #[test]
    fn counts_sum_to_shots() {
        let d = OutcomeDistribution::from_pairs([(-1.0, 0.2), (0.0, 0.5), (1.0, 0.3)], 1e-9);
        let mut rng = trial_rng(1, 0, 0);
        let c = d.sample_counts(12345, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 12345);
    }

    #[test]
    fn merging_close_outcomes() {
        let d = OutcomeDistribution::from_pairs([(1e-16, 0.3), (0.0, 0.3), (1.0, 0.4), (2.0, 0.0)], 1e-9);
        assert_eq!(d.values.len(), 2);
        assert_abs_diff_eq!(d.probabilities[0], 0.6);
    }

    #[test]
    fn too_few_shots_rejected() {
        let cfg = SampleConfig {
            shots: 3,
            seed: 0,
            trials: 1,
        };
        assert!(cfg.validate().is_err());
    }
}
