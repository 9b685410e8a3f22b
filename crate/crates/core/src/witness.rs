//! Two-party moment operators, witness verdicts and λ detection windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{seesaw_bound, SeesawConfig, WeightedPair};
use crate::error::{Error, Result};
use crate::operators::{expectation, tensor, HermitianOperator, MomentPair, QuantumState};

/// Moments of the summed outcome `x_A + x_B` of a local measurement pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalMoments {
    pub m1: HermitianOperator,
    pub m2: HermitianOperator,
    pub label: String,
}

impl GlobalMoments {
    /// `M1 = A1⊗I + I⊗B1`, `M2 = A2⊗I + 2 A1⊗B1 + I⊗B2`.
    pub fn from_parties(a: &MomentPair, b: &MomentPair, label: impl Into<String>) -> Self {
        let ia = HermitianOperator::identity(a.dim());
        let ib = HermitianOperator::identity(b.dim());
        let m1 = tensor(&a.first, &ib)
            .add(&tensor(&ia, &b.first))
            .expect("product dims agree");
        let m2 = HermitianOperator::linear_combination(&[
            (1.0, &tensor(&a.second, &ib)),
            (2.0, &tensor(&a.first, &b.first)),
            (1.0, &tensor(&ia, &b.second)),
        ])
        .expect("product dims agree");
        Self {
            m1,
            m2,
            label: label.into(),
        }
    }

    /// Both parties use the same local measurement.
    pub fn symmetric(local: &MomentPair, label: impl Into<String>) -> Self {
        Self::from_parties(local, local, label)
    }

    pub fn dim(&self) -> usize {
        self.m1.dim()
    }

    pub fn variance<S: QuantumState + ?Sized>(&self, state: &S) -> Result<f64> {
        let m1 = expectation(state, &self.m1)?;
        Ok(expectation(state, &self.m2)? - m1 * m1)
    }
}

/// Alias matching the operation name used in the CLI and docs.
pub fn build_global_moments(local: &MomentPair) -> GlobalMoments {
    GlobalMoments::symmetric(local, "")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessVerdict {
    pub lambda: f64,
    pub mu: f64,
    #[serde(rename = "V_value")]
    pub v_value: f64,
    pub c_sep: f64,
    pub detected: bool,
    /// `c_sep − V`; positive exactly when entanglement is detected.
    pub margin: f64,
}

impl WitnessVerdict {
    fn new(lambda: f64, mu: f64, v_value: f64, c_sep: f64) -> Self {
        let margin = c_sep - v_value;
        Self {
            lambda,
            mu,
            v_value,
            c_sep,
            detected: margin > 0.0,
            margin,
        }
    }
}

/// Evaluates `V = λ Δ²M_X + μ Δ²M_Y` on a state and compares it to `c_sep`.
/// Equality counts as not detected.
pub fn evaluate_witness<S: QuantumState + ?Sized>(
    state: &S,
    gx: &GlobalMoments,
    gy: &GlobalMoments,
    lambda: f64,
    mu: f64,
    c_sep: f64,
) -> Result<WitnessVerdict> {
    if gx.dim() != gy.dim() {
        return Err(Error::DimensionMismatch {
            expected: gx.dim(),
            found: gy.dim(),
        });
    }
    let v = lambda * gx.variance(state)? + mu * gy.variance(state)?;
    Ok(WitnessVerdict::new(lambda, mu, v, c_sep))
}

/// Same verdict from a measured variance tuple.
pub fn evaluate_witness_from_tuple(
    d2x: f64,
    d2y: f64,
    lambda: f64,
    mu: f64,
    c_sep: f64,
) -> Result<WitnessVerdict> {
    if !(d2x >= 0.0 && d2y >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variances must be nonnegative, got ({d2x}, {d2y})"
        )));
    }
    Ok(WitnessVerdict::new(lambda, mu, lambda * d2x + mu * d2y, c_sep))
}

/// Local measurement pair of one party.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMeasurements {
    pub x: MomentPair,
    pub y: MomentPair,
}

/// Bound values below this are treated as exact zeros (e.g. at `λ ∈ {0, 1}`
/// where an eigenstate makes a single variance vanish).
const ROUND_OFF_FLOOR: f64 = 1e-12;

/// Separability bound `c(λ)` for weights `(λ, 1 − λ)`, sampled on a uniform
/// grid over `[0, 1]` and linearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

impl BoundCurve {
    pub fn from_knots(lambdas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 2 || lambdas.len() != values.len() {
            return Err(Error::InvalidParameter(
                "bound curve needs at least two matching knots".into(),
            ));
        }
        if lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("knots must increase".into()));
        }
        Ok(Self { lambdas, values })
    }

    /// `c(λ) = inf V_A + inf V_B` on `n` uniform knots.
    pub fn compute(
        party_a: &LocalMeasurements,
        party_b: &LocalMeasurements,
        n: usize,
        config: &SeesawConfig,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two knots".into()));
        }
        let symmetric = party_a == party_b;
        let lambdas: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let values = lambdas
            .par_iter()
            .map(|&lambda| {
                let local = |p: &LocalMeasurements| -> Result<f64> {
                    let pair = WeightedPair::new(lambda, 1.0 - lambda, p.x.clone(), p.y.clone())?;
                    Ok(seesaw_bound(&pair, config).value)
                };
                let a = local(party_a)?;
                let c = if symmetric { 2.0 * a } else { a + local(party_b)? };
                Ok(if c.abs() < ROUND_OFF_FLOOR { 0.0 } else { c })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lambdas, values })
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let n = self.lambdas.len();
        if lambda <= self.lambdas[0] {
            return self.values[0];
        }
        if lambda >= self.lambdas[n - 1] {
            return self.values[n - 1];
        }
        let k = self.lambdas.partition_point(|&l| l <= lambda) - 1;
        let (l0, l1) = (self.lambdas[k], self.lambdas[k + 1]);
        let t = (lambda - l0) / (l1 - l0);
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionWindow {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub resolution: f64,
}

impl DetectionWindow {
    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        self.lambda_lo <= lo && hi <= self.lambda_hi
    }

    pub fn width(&self) -> f64 {
        self.lambda_hi - self.lambda_lo
    }
}

/// Maximal intervals of `λ ∈ [0, 1]` with `λ d2x + (1 − λ) d2y < c(λ)`.
///
/// `[0, 1]` is scanned at a step no coarser than `resolution` and each sign
/// change is bisected until the bracket is below `resolution / 4`. Reported
/// endpoints are the detecting side of the final bracket.
pub fn detection_window<F: Fn(f64) -> f64>(
    d2x: f64,
    d2y: f64,
    c_of_lambda: F,
    resolution: f64,
) -> Result<Vec<DetectionWindow>> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let detects = |l: f64| l * d2x + (1.0 - l) * d2y < c_of_lambda(l);
    let bisect = |mut inside: f64, mut outside: f64| {
        while (inside - outside).abs() > resolution / 4.0 {
            let mid = 0.5 * (inside + outside);
            if detects(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };

    let steps = (1.0 / resolution.min(1e-3)).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut windows = Vec::new();
    let mut open: Option<f64> = None;
    let mut prev = (grid[0], detects(grid[0]));
    if prev.1 {
        open = Some(0.0);
    }
    for &l in &grid[1..] {
        let d = detects(l);
        match (prev.1, d) {
            (false, true) => open = Some(bisect(l, prev.0)),
            (true, false) => {
                let hi = bisect(prev.0, l);
                windows.push(DetectionWindow {
                    lambda_lo: open.take().expect("window opened"),
                    lambda_hi: hi,
                    resolution,
                });
            }
            _ => {}
        }
        prev = (l, d);
    }
    if let Some(lo) = open {
        windows.push(DetectionWindow {
            lambda_lo: lo,
            lambda_hi: 1.0,
            resolution,
        });
    }
    Ok(windows)
}

/// One λ row of a noiseless-vs-adapted comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub c_noiseless: f64,
    pub c_adapted: f64,
    pub detected_noiseless: bool,
    pub detected_adapted: bool,
}

/// λ sweep of a variance tuple against the noiseless and noise-adapted
/// separability bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub alpha: f64,
    pub d2x: f64,
    pub d2y: f64,
    pub rows: Vec<SweepRow>,
    pub windows_noiseless: Vec<DetectionWindow>,
    pub windows_adapted: Vec<DetectionWindow>,
}

impl WitnessReport {
    pub fn detected(&self) -> bool {
        !self.windows_adapted.is_empty()
    }
}

pub fn witness_report(
    d2x: f64,
    d2y: f64,
    alpha: f64,
    noiseless: &BoundCurve,
    adapted: &BoundCurve,
    resolution: f64,
) -> Result<WitnessReport> {
    let rows = noiseless
        .lambdas
        .iter()
        .map(|&lambda| {
            let a = evaluate_witness_from_tuple(d2x, d2y, lambda, 1.0 - lambda, noiseless.eval(lambda))?;
            let b = evaluate_witness_from_tuple(d2x, d2y, lambda, 1.0 - lambda, adapted.eval(lambda))?;
            Ok(SweepRow {
                lambda,
                v: a.v_value,
                c_noiseless: a.c_sep,
                c_adapted: b.c_sep,
                detected_noiseless: a.detected,
                detected_adapted: b.detected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessReport {
        alpha,
        d2x,
        d2y,
        rows,
        windows_noiseless: detection_window(d2x, d2y, |l| noiseless.eval(l), resolution)?,
        windows_adapted: detection_window(d2x, d2y, |l| adapted.eval(l), resolution)?,
    })
}
