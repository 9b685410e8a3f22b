//! Observables, states, POVMs and moment operators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, jacobi_eigh, Matrix, C64, ONE, ZERO};

/// Elementwise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for positivity and completeness checks.
pub const PSD_TOL: f64 = 1e-10;
/// Default absolute tolerance for grouping degenerate eigenvalues.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

const STATE_NORM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const IMAG_DISCARD_TOL: f64 = 1e-8;

/// A dense Hermitian operator on a space of dimension at least 2.
///
/// The stored matrix is the exact Hermitian part of the input, so downstream
/// products never accumulate asymmetry from round-off in the constructor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct HermitianOperator(Matrix);

impl HermitianOperator {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.dim() < 2 {
            return Err(Error::InvalidDimension(m.dim()));
        }
        let defect = m.hermitian_defect();
        if !(defect <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian {
                max_asymmetry: defect,
            });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wraps a matrix known to be Hermitian up to round-off, e.g. a sum of
    /// products of Hermitian operators.
    pub(crate) fn from_hermitian_unchecked(m: Matrix) -> Self {
        Self(m.hermitian_part())
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_real_diagonal(diag))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim))
    }

    /// Projector `|v⟩⟨v|`.
    pub fn projector(state: &PureState) -> Self {
        Self::from_hermitian_unchecked(Matrix::outer(state.amplitudes(), state.amplitudes()))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }

    /// `self · self`, which is Hermitian.
    pub fn square(&self) -> Self {
        Self::from_hermitian_unchecked(&self.0 * &self.0)
    }

    /// Real linear combination `Σ c_k A_k`; all terms must share a dimension.
    pub fn linear_combination(terms: &[(f64, &HermitianOperator)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, a)| a.dim())
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        let mut acc = Matrix::zeros(dim);
        for (c, a) in terms {
            check_dim(dim, a.dim())?;
            acc = &acc + &a.0.scale(*c);
        }
        Ok(Self(acc))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn eig(&self) -> (Vec<f64>, Vec<PureState>) {
        let e = jacobi_eigh(&self.0);
        let vecs = e.vectors.into_iter().map(PureState::from_normalized).collect();
        (e.values, vecs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        jacobi_eigh(&self.0).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn ground_state(&self) -> (f64, PureState) {
        let e = jacobi_eigh(&self.0);
        let v = e.vectors.into_iter().next().expect("dim >= 2");
        (e.values[0], PureState::from_normalized(v))
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
}

impl fmt::Display for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.0.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Wire format: `{"dim": n, "entries": [[[re, im], ...], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
pub(crate) struct OperatorRepr {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl OperatorRepr {
    pub(crate) fn from_matrix(m: &Matrix) -> Self {
        Self {
            dim: m.dim(),
            entries: m
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }

    pub(crate) fn entries_owned(self) -> Vec<Vec<[f64; 2]>> {
        self.entries
    }

    pub(crate) fn into_matrix(self) -> Result<Matrix> {
        if self.entries.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.entries.len(),
            });
        }
        let rows: Vec<Vec<C64>> = self
            .entries
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        Matrix::from_rows(&rows).ok_or(Error::DimensionMismatch {
            expected: self.dim,
            found: 0,
        })
    }
}

impl TryFrom<OperatorRepr> for HermitianOperator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        Self::new(r.into_matrix()?)
    }
}

impl From<HermitianOperator> for OperatorRepr {
    fn from(op: HermitianOperator) -> Self {
        OperatorRepr::from_matrix(&op.0)
    }
}

/// Unit vector in a finite-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        let n = linalg::norm(&amplitudes);
        if (n - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidState(format!("norm {n} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let n = linalg::norm(&amplitudes);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(amplitudes.into_iter().map(|z| z / n).collect())
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub(crate) fn from_normalized(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for dim {dim}"
            )));
        }
        let mut a = vec![ZERO; dim];
        a[index] = ONE;
        Self::new(a)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// `|self⟩ ⊗ |other⟩`.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let amps = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        PureState::from_normalized(amps)
    }

    pub fn overlap(&self, other: &PureState) -> C64 {
        linalg::inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: HermitianOperator::projector(self),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    dim: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl TryFrom<StateRepr> for PureState {
    type Error = Error;
    fn try_from(r: StateRepr) -> Result<Self> {
        check_dim(r.dim, r.amplitudes.len())?;
        PureState::new(r.amplitudes.into_iter().map(|[a, b]| C64::new(a, b)).collect())
    }
}

impl From<PureState> for StateRepr {
    fn from(s: PureState) -> Self {
        StateRepr {
            dim: s.dim(),
            amplitudes: s.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// Positive semidefinite operator with unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianOperator", into = "HermitianOperator")]
pub struct DensityMatrix {
    matrix: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(matrix: HermitianOperator) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = matrix.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Convex mixture `Σ p_k ρ_k`.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let ops: Vec<(f64, &HermitianOperator)> =
            terms.iter().map(|(p, r)| (*p, &r.matrix)).collect();
        Self::new(HermitianOperator::linear_combination(&ops)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.matrix
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: tensor(&self.matrix, &other.matrix),
        }
    }

    /// Partial trace over the second factor of a `dim_a ⊗ dim_b` state.
    pub fn reduce_first(&self, dim_a: usize) -> Result<DensityMatrix> {
        let (dim_a, dim_b) = split_dims(self.dim(), dim_a)?;
        let mut m = Matrix::zeros(dim_a);
        for i in 0..dim_a {
            for j in 0..dim_a {
                m[(i, j)] = (0..dim_b)
                    .map(|k| self.matrix.get(i * dim_b + k, j * dim_b + k))
                    .sum();
            }
        }
        DensityMatrix::new(HermitianOperator::from_hermitian_unchecked(m))
    }

    /// Partial trace over the first factor of a `dim_a ⊗ dim_b` state.
    pub fn reduce_second(&self, dim_a: usize) -> Result<DensityMatrix> {
        let (dim_a, dim_b) = split_dims(self.dim(), dim_a)?;
        let mut m = Matrix::zeros(dim_b);
        for k in 0..dim_b {
            for l in 0..dim_b {
                m[(k, l)] = (0..dim_a)
                    .map(|i| self.matrix.get(i * dim_b + k, i * dim_b + l))
                    .sum();
            }
        }
        DensityMatrix::new(HermitianOperator::from_hermitian_unchecked(m))
    }
}

fn split_dims(total: usize, dim_a: usize) -> Result<(usize, usize)> {
    if dim_a < 2 || total % dim_a != 0 || total / dim_a < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot split dim {total} with first factor {dim_a}"
        )));
    }
    Ok((dim_a, total / dim_a))
}

impl TryFrom<HermitianOperator> for DensityMatrix {
    type Error = Error;
    fn try_from(op: HermitianOperator) -> Result<Self> {
        DensityMatrix::new(op)
    }
}

impl From<DensityMatrix> for HermitianOperator {
    fn from(d: DensityMatrix) -> Self {
        d.matrix
    }
}

impl From<&PureState> for DensityMatrix {
    fn from(s: &PureState) -> Self {
        s.to_density()
    }
}

/// Anything that assigns expectation values to observables.
pub trait QuantumState {
    fn dim(&self) -> usize;
    /// Raw complex `tr(ρ·op)`; dimensions are checked by [`expectation`].
    fn raw_expectation(&self, op: &HermitianOperator) -> C64;
}

impl QuantumState for PureState {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }
    fn raw_expectation(&self, op: &HermitianOperator) -> C64 {
        op.matrix().quadratic_form(&self.amplitudes)
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn raw_expectation(&self, op: &HermitianOperator) -> C64 {
        self.matrix.matrix().trace_product(op.matrix())
    }
}

/// `tr(ρ·op)` as a real number.
pub fn expectation<S: QuantumState + ?Sized>(state: &S, op: &HermitianOperator) -> Result<f64> {
    check_dim(state.dim(), op.dim())?;
    let z = state.raw_expectation(op);
    if z.im.abs() > IMAG_DISCARD_TOL * (1.0 + z.re.abs()) {
        return Err(Error::Inconsistent(format!(
            "expectation of a Hermitian operator has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// Kronecker product of two operators.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::from_hermitian_unchecked(a.matrix().kron(b.matrix()))
}

/// Spin-1 angular momentum components `(L_X, L_Y, L_Z)` in the `|+1⟩, |0⟩, |−1⟩` basis.
pub fn spin1_components() -> (HermitianOperator, HermitianOperator, HermitianOperator) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    let lx = Matrix::from_rows(&[
        vec![ZERO, r(h), ZERO],
        vec![r(h), ZERO, r(h)],
        vec![ZERO, r(h), ZERO],
    ])
    .unwrap();
    let ly = Matrix::from_rows(&[
        vec![ZERO, i(-h), ZERO],
        vec![i(h), ZERO, i(-h)],
        vec![ZERO, i(h), ZERO],
    ])
    .unwrap();
    let lz = Matrix::from_real_diagonal(&[1.0, 0.0, -1.0]);
    (
        HermitianOperator(lx),
        HermitianOperator(ly),
        HermitianOperator(lz),
    )
}

/// Measurement with real outcome labels.
///
/// Elements are positive semidefinite and sum to the identity. A single
/// outcome is allowed (it is what a fully degenerate observable produces).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmRepr", into = "PovmRepr")]
pub struct Povm {
    outcomes: Vec<f64>,
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(outcomes: Vec<f64>, elements: Vec<HermitianOperator>) -> Result<Self> {
        if outcomes.len() != elements.len() {
            return Err(Error::InvalidPovm(format!(
                "{} outcomes but {} elements",
                outcomes.len(),
                elements.len()
            )));
        }
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let dim = first.dim();
        if let Some(x) = outcomes.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidPovm(format!("outcome {x} is not a finite real")));
        }
        let mut sum = Matrix::zeros(dim);
        for (k, e) in elements.iter().enumerate() {
            check_dim(dim, e.dim())?;
            let min = e.min_eigenvalue();
            if min < -PSD_TOL {
                return Err(Error::InvalidPovm(format!(
                    "element {k} is not positive (min eigenvalue {min:.3e})"
                )));
            }
            sum = &sum + e.matrix();
        }
        let defect = (&sum - &Matrix::identity(dim)).max_abs();
        if defect > PSD_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Self { outcomes, elements })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &HermitianOperator)> {
        self.outcomes.iter().copied().zip(&self.elements)
    }

    /// Outcome probabilities `tr(ρ P(x))`.
    pub fn probabilities<S: QuantumState + ?Sized>(&self, state: &S) -> Result<Vec<f64>> {
        self.elements.iter().map(|e| expectation(state, e)).collect()
    }

    pub fn moment_pair(&self) -> Result<MomentPair> {
        let mut m = moments(self, 2)?;
        let second = m.pop().unwrap();
        let first = m.pop().unwrap();
        MomentPair::new(first, second)
    }
}

#[derive(Serialize, Deserialize)]
struct PovmRepr {
    outcomes: Vec<f64>,
    elements: Vec<HermitianOperator>,
}

impl TryFrom<PovmRepr> for Povm {
    type Error = Error;
    fn try_from(r: PovmRepr) -> Result<Self> {
        Povm::new(r.outcomes, r.elements)
    }
}

impl From<Povm> for PovmRepr {
    fn from(p: Povm) -> Self {
        PovmRepr {
            outcomes: p.outcomes,
            elements: p.elements,
        }
    }
}

/// Spectral measurement of `op`: one outcome per distinct eigenvalue.
///
/// Ascending eigenvalues closer than `degeneracy_tol` to the first member of
/// the current cluster are merged; the outcome is the cluster mean.
pub fn projective_povm(op: &HermitianOperator, degeneracy_tol: f64) -> Povm {
    let (values, vectors) = op.eig();
    let dim = op.dim();
    let mut outcomes = Vec::new();
    let mut elements = Vec::new();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[start] <= degeneracy_tol {
            end += 1;
        }
        let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
        let mut p = Matrix::zeros(dim);
        for v in &vectors[start..end] {
            p = &p + &Matrix::outer(v.amplitudes(), v.amplitudes());
        }
        outcomes.push(mean);
        elements.push(HermitianOperator::from_hermitian_unchecked(p));
        start = end;
    }
    Povm { outcomes, elements }
}

/// Moment operators `[X^(1), ..., X^(max_order)]` with `X^(N) = Σ_x x^N P(x)`.
pub fn moments(povm: &Povm, max_order: usize) -> Result<Vec<HermitianOperator>> {
    if max_order < 1 {
        return Err(Error::InvalidParameter("max_order must be at least 1".into()));
    }
    let dim = povm.dim();
    let mut zeroth = Matrix::zeros(dim);
    for e in povm.elements() {
        zeroth = &zeroth + e.matrix();
    }
    let defect = (&zeroth - &Matrix::identity(dim)).max_abs();
    if defect > PSD_TOL {
        return Err(Error::InvalidPovm(format!(
            "zeroth moment differs from identity by {defect:.3e}"
        )));
    }
    Ok((1..=max_order as i32)
        .map(|n| {
            let mut acc = Matrix::zeros(dim);
            for (x, e) in povm.iter() {
                acc = &acc + &e.matrix().scale(x.powi(n));
            }
            HermitianOperator::from_hermitian_unchecked(acc)
        })
        .collect())
}

/// First and second moment operators of one measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub first: HermitianOperator,
    pub second: HermitianOperator,
}

impl MomentPair {
    pub fn new(first: HermitianOperator, second: HermitianOperator) -> Result<Self> {
        check_dim(first.dim(), second.dim())?;
        let var = second.sub(&first.square())?;
        let min = var.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidParameter(format!(
                "X^(2) - (X^(1))^2 is not positive (min eigenvalue {min:.3e})"
            )));
        }
        Ok(Self { first, second })
    }

    /// Moments of the projective measurement of `op`, i.e. `(op, op²)`.
    pub fn projective(op: &HermitianOperator) -> Self {
        Self {
            first: op.clone(),
            second: op.square(),
        }
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn mean<S: QuantumState + ?Sized>(&self, state: &S) -> Result<f64> {
        expectation(state, &self.first)
    }

    /// `⟨X^(2)⟩ − ⟨X^(1)⟩²`.
    pub fn variance<S: QuantumState + ?Sized>(&self, state: &S) -> Result<f64> {
        let m1 = expectation(state, &self.first)?;
        let m2 = expectation(state, &self.second)?;
        Ok(m2 - m1 * m1)
    }

    /// Interval `[λ_min, λ_max]` of the first moment operator.
    pub fn mean_range(&self) -> (f64, f64) {
        let ev = self.first.eigenvalues();
        (ev[0], *ev.last().unwrap())
    }
}
