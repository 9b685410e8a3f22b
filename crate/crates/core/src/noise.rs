//! Local noise as mixtures of unitaries, applied to measurements in the
//! Heisenberg picture, plus the spin-flip family and its parameter fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64};
use crate::operators::{
    projective_povm, spin1_components, HermitianOperator, MomentPair, OperatorRepr, Povm,
    PureState, DEFAULT_DEGENERACY_TOL,
};

const PROBABILITY_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

/// One branch `(p, U)` of a mixture-of-unitaries channel.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryBranch {
    pub probability: f64,
    pub unitary: Matrix,
}

/// Channel `ρ ↦ Σ p_k U_k ρ U_k†`, with dual `P ↦ Σ p_k U_k† P U_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct NoiseChannel {
    dim: usize,
    branches: Vec<UnitaryBranch>,
}

impl NoiseChannel {
    /// Validates probabilities and unitarity. Zero-probability branches are
    /// dropped.
    pub fn new(dim: usize, branches: Vec<UnitaryBranch>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut total = 0.0;
        for (k, b) in branches.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.probability) {
                return Err(Error::InvalidChannel(format!(
                    "branch {k} has probability {} outside [0, 1]",
                    b.probability
                )));
            }
            if b.unitary.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.unitary.dim(),
                });
            }
            let defect = (&(&b.unitary.adjoint() * &b.unitary) - &Matrix::identity(dim)).max_abs();
            if defect > UNITARY_TOL {
                return Err(Error::InvalidChannel(format!(
                    "branch {k} is not unitary (|U†U - I| = {defect:.3e})"
                )));
            }
            total += b.probability;
        }
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidChannel(format!(
                "branch probabilities sum to {total}"
            )));
        }
        let branches = branches.into_iter().filter(|b| b.probability > 0.0).collect();
        Ok(Self { dim, branches })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            branches: vec![UnitaryBranch {
                probability: 1.0,
                unitary: Matrix::identity(dim),
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branches(&self) -> &[UnitaryBranch] {
        &self.branches
    }

    /// Heisenberg-picture action on an observable or POVM element.
    pub fn dual_apply(&self, op: &HermitianOperator) -> Result<HermitianOperator> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: op.dim(),
            });
        }
        let mut acc = Matrix::zeros(self.dim);
        for b in &self.branches {
            let conj = &(&b.unitary.adjoint() * op.matrix()) * &b.unitary;
            acc = &acc + &conj.scale(b.probability);
        }
        Ok(HermitianOperator::from_hermitian_unchecked(acc))
    }
}

/// Elementwise dual action; outcome labels are kept.
pub fn noisy_povm(channel: &NoiseChannel, povm: &Povm) -> Result<Povm> {
    let elements = povm
        .elements()
        .iter()
        .map(|e| channel.dual_apply(e))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(povm.outcomes().to_vec(), elements)
}

/// Moments of the noisy detector, `(T*[X^(1)], T*[X^(2)])`. Equal to the
/// moments of [`noisy_povm`] by linearity of the dual map.
pub fn noisy_moment_pair(channel: &NoiseChannel, pair: &MomentPair) -> Result<MomentPair> {
    Ok(MomentPair {
        first: channel.dual_apply(&pair.first)?,
        second: channel.dual_apply(&pair.second)?,
    })
}

/// `e^{−iπ L_Z} = diag(−1, 1, −1)` for spin 1.
pub fn spin_flip_unitary() -> Matrix {
    Matrix::from_real_diagonal(&[-1.0, 1.0, -1.0])
}

/// Random spin flip in the `L_X`–`L_Y` plane with flip parameter `alpha`:
/// branches `(1 − α/2, I)` and `(α/2, U_flip)`.
pub fn spin_flip_channel(alpha: f64) -> Result<NoiseChannel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "spin-flip parameter {alpha} outside [0, 1]"
        )));
    }
    NoiseChannel::new(
        3,
        vec![
            UnitaryBranch {
                probability: 1.0 - alpha / 2.0,
                unitary: Matrix::identity(3),
            },
            UnitaryBranch {
                probability: alpha / 2.0,
                unitary: spin_flip_unitary(),
            },
        ],
    )
}

/// Projective `L_X` and `L_Y` measurements on a qutrit.
pub fn spin1_povms() -> (Povm, Povm) {
    let (lx, ly, _) = spin1_components();
    (
        projective_povm(&lx, DEFAULT_DEGENERACY_TOL),
        projective_povm(&ly, DEFAULT_DEGENERACY_TOL),
    )
}

/// `L_X`, `L_Y` POVMs seen through the spin-flip channel.
pub fn spin_flip_povms(alpha: f64) -> Result<(Povm, Povm)> {
    let channel = spin_flip_channel(alpha)?;
    let (x, y) = spin1_povms();
    Ok((noisy_povm(&channel, &x)?, noisy_povm(&channel, &y)?))
}

/// Moment pairs of the spin-flip–disturbed `L_X`, `L_Y` detectors.
pub fn spin_flip_moment_pairs(alpha: f64) -> Result<(MomentPair, MomentPair)> {
    let (x, y) = spin_flip_povms(alpha)?;
    Ok((x.moment_pair()?, y.moment_pair()?))
}

#[derive(Serialize, Deserialize)]
struct BranchRepr {
    p: f64,
    unitary: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    dim: usize,
    branches: Vec<BranchRepr>,
}

impl TryFrom<ChannelRepr> for NoiseChannel {
    type Error = Error;
    fn try_from(r: ChannelRepr) -> Result<Self> {
        let branches = r
            .branches
            .into_iter()
            .map(|b| {
                let rows: Vec<Vec<C64>> = b
                    .unitary
                    .into_iter()
                    .map(|row| row.into_iter().map(|[re, im]| C64::new(re, im)).collect())
                    .collect();
                let unitary = Matrix::from_rows(&rows).ok_or_else(|| {
                    Error::InvalidChannel("unitary must be a square matrix".into())
                })?;
                Ok(UnitaryBranch {
                    probability: b.p,
                    unitary,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NoiseChannel::new(r.dim, branches)
    }
}

impl From<NoiseChannel> for ChannelRepr {
    fn from(c: NoiseChannel) -> Self {
        ChannelRepr {
            dim: c.dim,
            branches: c
                .branches
                .iter()
                .map(|b| BranchRepr {
                    p: b.probability,
                    unitary: OperatorRepr::from_matrix(&b.unitary).entries_owned(),
                })
                .collect(),
        }
    }
}

/// A calibration state with an observed value of the weighted variance sum.
#[derive(Clone, Debug)]
pub struct CalibrationPoint {
    pub state: PureState,
    pub measured: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFitResult {
    pub alpha: f64,
    pub residual: f64,
    pub per_state_residuals: Vec<f64>,
}

const SCAN_STEP: f64 = 1e-4;
const REFINE_TOL: f64 = 1e-6;

/// Least-squares fit of a one-parameter noise family to calibration data.
///
/// The model value for each state is `λ Δ²X' + μ Δ²Y'` computed from the
/// noisy moment operators of `povm_x`, `povm_y`. The loss is scanned on
/// `[0, 1]` at step 1e-4 and the best cell is refined by golden-section
/// search to 1e-6.
pub fn fit_alpha<F>(
    family: F,
    povm_x: &Povm,
    povm_y: &Povm,
    calibration: &[CalibrationPoint],
    weights: (f64, f64),
) -> Result<NoiseFitResult>
where
    F: Fn(f64) -> Result<NoiseChannel> + Sync,
{
    if calibration.is_empty() {
        return Err(Error::InvalidParameter("calibration set is empty".into()));
    }
    if let Some(p) = calibration.iter().find(|p| !p.measured.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "measured value {} is not finite",
            p.measured
        )));
    }
    // the dual map is linear, so noisy moments are T*(X^(N)) of the ideal ones
    let base_x = povm_x.moment_pair()?;
    let base_y = povm_y.moment_pair()?;
    let residuals = |alpha: f64| -> Result<Vec<f64>> {
        let channel = family(alpha)?;
        let x = noisy_moment_pair(&channel, &base_x)?;
        let y = noisy_moment_pair(&channel, &base_y)?;
        calibration
            .iter()
            .map(|p| {
                let v = weights.0 * x.variance(&p.state)? + weights.1 * y.variance(&p.state)?;
                Ok((v - p.measured).powi(2))
            })
            .collect()
    };
    let loss = |alpha: f64| -> Result<f64> { Ok(residuals(alpha)?.iter().sum()) };

    let steps = (1.0 / SCAN_STEP).round() as usize;
    let scan: Vec<(f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let a = k as f64 / steps as f64;
            loss(a).map(|l| (a, l))
        })
        .collect::<Result<Vec<_>>>()?;
    // ties resolve to the smaller alpha since min_by keeps the first minimum
    let (best_idx, &(mut alpha, mut best)) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap();

    let lo = scan[best_idx.saturating_sub(1)].0;
    let hi = scan[(best_idx + 1).min(steps)].0;
    let refined = golden_section(|a| loss(a).unwrap_or(f64::INFINITY), lo, hi, REFINE_TOL);
    let refined_loss = loss(refined)?;
    if refined_loss < best {
        alpha = refined;
        best = refined_loss;
    }
    let per_state_residuals = residuals(alpha)?;
    debug_assert!((per_state_residuals.iter().sum::<f64>() - best).abs() <= 1e-12 * (1.0 + best));
    Ok(NoiseFitResult {
        alpha,
        residual: per_state_residuals.iter().sum(),
        per_state_residuals,
    })
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
