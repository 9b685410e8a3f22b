//! Lower bounds on weighted variance sums `λ Δ²X + μ Δ²Y` over pure states.
//!
//! For fixed means `(x̄, ȳ)` the penalty operator
//!
//! ```text
//! P(x̄, ȳ) = λ (X² − 2x̄ X¹ + x̄²) + μ (Y² − 2ȳ Y¹ + ȳ²)
//! ```
//!
//! satisfies `⟨ψ|P|ψ⟩ = V(ψ) + λ(⟨X¹⟩ − x̄)² + μ(⟨Y¹⟩ − ȳ)²`, hence
//! `inf_ψ V(ψ) = min_{x̄,ȳ} λ_min(P(x̄, ȳ))`. Two routes evaluate the right
//! side: an alternating (seesaw) descent and a brute-force mesh over the
//! spectral box of the first moments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{HermitianOperator, MomentPair, PureState};

/// Weights and the two measurements of a weighted uncertainty sum.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPair {
    pub lambda: f64,
    pub mu: f64,
    pub x: MomentPair,
    pub y: MomentPair,
}

impl WeightedPair {
    pub fn new(lambda: f64, mu: f64, x: MomentPair, y: MomentPair) -> Result<Self> {
        if !(lambda >= 0.0 && mu >= 0.0 && lambda + mu > 0.0) || !(lambda + mu).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weights must be nonnegative with positive sum, got ({lambda}, {mu})"
            )));
        }
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        Ok(Self { lambda, mu, x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Same measurements, weights multiplied by `s`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        Self::new(self.lambda * s, self.mu * s, self.x.clone(), self.y.clone())
    }

    /// `λ Δ²X + μ Δ²Y` on a pure state.
    pub fn value(&self, state: &PureState) -> Result<f64> {
        Ok(self.lambda * self.x.variance(state)? + self.mu * self.y.variance(state)?)
    }

    pub fn means(&self, state: &PureState) -> Result<(f64, f64)> {
        Ok((self.x.mean(state)?, self.y.mean(state)?))
    }

    pub fn penalty_operator(&self, x_bar: f64, y_bar: f64) -> HermitianOperator {
        let id = HermitianOperator::identity(self.dim());
        HermitianOperator::linear_combination(&[
            (self.lambda, &self.x.second),
            (-2.0 * self.lambda * x_bar, &self.x.first),
            (self.mu, &self.y.second),
            (-2.0 * self.mu * y_bar, &self.y.first),
            (self.lambda * x_bar * x_bar + self.mu * y_bar * y_bar, &id),
        ])
        .expect("dimensions validated in constructor")
    }
}

/// `penalty = λ(X^(2) − 2x̄X^(1) + x̄²I) + μ(Y^(2) − 2ȳY^(1) + ȳ²I)`.
pub fn penalty_operator(pair: &WeightedPair, x_bar: f64, y_bar: f64) -> HermitianOperator {
    pair.penalty_operator(x_bar, y_bar)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Seesaw,
    Grid,
    GridRefined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub minimizer: PureState,
    pub means: (f64, f64),
    pub iterations: usize,
    /// Whether the run that produced `value` met the tolerance.
    pub converged: bool,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeesawConfig {
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            tol: 1e-10,
            max_iter: 500,
            seed: 0x5EE5_A11D,
        }
    }
}

/// One seesaw descent from fixed initial means.
#[derive(Clone, Debug)]
pub struct SeesawRun {
    /// `V(ψ_k)` after every iteration; non-increasing up to round-off.
    pub values: Vec<f64>,
    pub state: PureState,
    pub means: (f64, f64),
    pub converged: bool,
}

impl SeesawRun {
    pub fn value(&self) -> f64 {
        *self.values.last().expect("at least one iteration")
    }

    pub fn iterations(&self) -> usize {
        self.values.len()
    }
}

/// Alternates ground state of the penalty operator and mean update.
pub fn seesaw_run(pair: &WeightedPair, start: (f64, f64), tol: f64, max_iter: usize) -> SeesawRun {
    let mut means = start;
    let mut values = Vec::new();
    let mut state;
    loop {
        let (_, ground) = pair.penalty_operator(means.0, means.1).ground_state();
        state = ground;
        means = pair.means(&state).expect("dims agree");
        let v = pair.value(&state).expect("dims agree");
        let done = values.last().is_some_and(|prev: &f64| (prev - v).abs() < tol);
        values.push(v);
        if done {
            return SeesawRun {
                values,
                state,
                means,
                converged: true,
            };
        }
        if values.len() >= max_iter.max(1) {
            return SeesawRun {
                values,
                state,
                means,
                converged: false,
            };
        }
    }
}

fn better(a: &(f64, (f64, f64)), b: &(f64, (f64, f64))) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1 .0.total_cmp(&b.1 .0))
        .then(a.1 .1.total_cmp(&b.1 .1))
}

/// Multi-start seesaw. Initial means are uniform in the spectral box of the
/// first moments; start `k` draws from stream `k` of a ChaCha generator.
pub fn seesaw_bound(pair: &WeightedPair, config: &SeesawConfig) -> BoundResult {
    let (x_lo, x_hi) = pair.x.mean_range();
    let (y_lo, y_hi) = pair.y.mean_range();
    let runs: Vec<SeesawRun> = (0..config.starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let start = (
                x_lo + (x_hi - x_lo) * rng.random::<f64>(),
                y_lo + (y_hi - y_lo) * rng.random::<f64>(),
            );
            seesaw_run(pair, start, config.tol, config.max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| better(&(a.value(), a.means), &(b.value(), b.means)))
        .unwrap();
    BoundResult {
        value: best.value(),
        iterations: best.iterations(),
        minimizer: best.state,
        means: best.means,
        converged: best.converged,
        method: Method::Seesaw,
    }
}

/// Brute-force oracle: smallest penalty eigenvalue on a `grid_n × grid_n`
/// mesh of means, followed by `polish_steps` seesaw iterations from the best
/// cell (method `grid_refined`; `grid` when `polish_steps == 0`).
///
/// The reported value is always `V` evaluated on the returned minimizer,
/// which is no larger than the mesh eigenvalue it came from.
pub fn grid_bound(pair: &WeightedPair, grid_n: usize, polish_steps: usize) -> Result<BoundResult> {
    if grid_n < 10 {
        return Err(Error::InvalidParameter(format!(
            "grid_n must be at least 10, got {grid_n}"
        )));
    }
    let (x_lo, x_hi) = pair.x.mean_range();
    let (y_lo, y_hi) = pair.y.mean_range();
    let node = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (grid_n - 1) as f64;

    let best = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let xb = node(x_lo, x_hi, i);
            (0..grid_n)
                .map(|j| {
                    let yb = node(y_lo, y_hi, j);
                    (pair.penalty_operator(xb, yb).min_eigenvalue(), (xb, yb))
                })
                .min_by(better)
                .unwrap()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(better)
        .unwrap();

    let (_, mut state) = pair.penalty_operator(best.1 .0, best.1 .1).ground_state();
    for _ in 0..polish_steps {
        let (xb, yb) = pair.means(&state)?;
        state = pair.penalty_operator(xb, yb).ground_state().1;
    }
    Ok(BoundResult {
        value: pair.value(&state)?,
        means: pair.means(&state)?,
        minimizer: state,
        iterations: polish_steps,
        converged: true,
        method: if polish_steps == 0 {
            Method::Grid
        } else {
            Method::GridRefined
        },
    })
}

/// Separability bound from the two parties' local bounds.
pub fn compose_sep_bound(local_a: &BoundResult, local_b: &BoundResult) -> f64 {
    local_a.value + local_b.value
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub lambda: f64,
    /// Bound for weights `(λ, 1 − λ)`.
    pub c: f64,
    pub delta2_x: f64,
    pub delta2_y: f64,
    pub converged: bool,
}

/// Lower-left boundary of the achievable `(Δ²X, Δ²Y)` region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub points: Vec<RegionPoint>,
}

impl RegionBoundary {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    /// Largest amount by which a converged point falls below a supporting
    /// line `λ_i dx + (1 − λ_i) dy = c_i` (zero when every point is on or
    /// above every line).
    pub fn max_support_violation(&self) -> f64 {
        let ok: Vec<&RegionPoint> = self.points.iter().filter(|p| p.converged).collect();
        let mut worst = 0.0_f64;
        for line in &ok {
            for p in &ok {
                let lhs = line.lambda * p.delta2_x + (1.0 - line.lambda) * p.delta2_y;
                worst = worst.max(line.c - lhs);
            }
        }
        worst
    }
}

/// Traces the region boundary by solving the bound for each `λ` with
/// `μ = 1 − λ` and recording the minimizer's variance pair.
pub fn trace_region(
    x: &MomentPair,
    y: &MomentPair,
    lambdas: &[f64],
    config: &SeesawConfig,
) -> Result<RegionBoundary> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::InvalidParameter(format!("lambda {l} not in (0, 1)")));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("lambdas must be sorted ascending".into()));
    }
    let points = lambdas
        .par_iter()
        .map(|&lambda| {
            let pair = WeightedPair::new(lambda, 1.0 - lambda, x.clone(), y.clone())?;
            let b = seesaw_bound(&pair, config);
            Ok(RegionPoint {
                lambda,
                c: b.value,
                delta2_x: x.variance(&b.minimizer)?,
                delta2_y: y.variance(&b.minimizer)?,
                converged: b.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionBoundary { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::spin_flip_moment_pairs;
    use crate::operators::spin1_components;
    use approx::assert_abs_diff_eq;

    fn spin_pair(lambda: f64, mu: f64, alpha: f64) -> WeightedPair {
        let (x, y) = spin_flip_moment_pairs(alpha).unwrap();
        WeightedPair::new(lambda, mu, x, y).unwrap()
    }

    #[test]
    fn weights_validated() {
        let (x, y) = spin_flip_moment_pairs(0.0).unwrap();
        assert!(WeightedPair::new(0.0, 0.0, x.clone(), y.clone()).is_err());
        assert!(WeightedPair::new(-1.0, 2.0, x.clone(), y.clone()).is_err());
        assert!(WeightedPair::new(f64::NAN, 1.0, x, y).is_err());
    }

    #[test]
    fn penalty_examples() {
        let (lx, _, _) = spin1_components();
        let p = spin_pair(1.0, 0.0, 0.0).penalty_operator(1.0, 0.0);
        let shifted = lx.sub(&HermitianOperator::identity(3)).unwrap();
        assert!((p.matrix() - shifted.square().matrix()).max_abs() < 1e-14);
        assert_abs_diff_eq!(p.min_eigenvalue(), 0.0, epsilon = 1e-14);

        let p = spin_pair(0.5, 0.5, 0.0).penalty_operator(0.0, 0.0);
        assert_abs_diff_eq!(p.min_eigenvalue(), 0.5, epsilon = 1e-14);

        let noisy = spin_pair(0.5, 0.5, 0.2).penalty_operator(0.0, 0.0);
        assert!((noisy.matrix() - p.matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn penalty_dominates_value() {
        let pair = spin_pair(0.3, 0.7, 0.1);
        let psi = PureState::from_real(&[0.3, -0.5, 0.8]).unwrap();
        let (mx, my) = pair.means(&psi).unwrap();
        let v = pair.value(&psi).unwrap();
        let at_means = crate::operators::expectation(&psi, &pair.penalty_operator(mx, my)).unwrap();
        assert_abs_diff_eq!(at_means, v, epsilon = 1e-14);
        let off = crate::operators::expectation(&psi, &pair.penalty_operator(mx + 0.1, my)).unwrap();
        assert_abs_diff_eq!(off - v, 0.3 * 0.01, epsilon = 1e-14);
    }

    #[test]
    fn seesaw_single_observable() {
        let b = seesaw_bound(&spin_pair(1.0, 0.0, 0.0), &SeesawConfig::default());
        assert!(b.value.abs() < 1e-12);
        assert!(b.converged);
    }

    #[test]
    fn seesaw_is_monotone() {
        let pair = spin_pair(0.4, 0.6, 0.2);
        let run = seesaw_run(&pair, (0.3, -0.2), 1e-12, 500);
        for w in run.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn grid_examples() {
        let b = grid_bound(&spin_pair(1.0, 0.0, 0.0), 101, 0).unwrap();
        assert!(b.value <= 1e-4);
        assert_eq!(b.method, Method::Grid);
        let b = grid_bound(&spin_pair(1.0, 1.0, 1.0), 50, 1).unwrap();
        assert_abs_diff_eq!(b.value, 1.0, epsilon = 1e-12);
        assert!(grid_bound(&spin_pair(1.0, 1.0, 0.0), 9, 1).is_err());
    }

    #[test]
    fn region_rejects_bad_lambdas() {
        let (x, y) = spin_flip_moment_pairs(0.0).unwrap();
        let cfg = SeesawConfig::default();
        assert!(trace_region(&x, &y, &[0.6, 0.4], &cfg).is_err());
        assert!(trace_region(&x, &y, &[0.0, 0.4], &cfg).is_err());
    }
}
