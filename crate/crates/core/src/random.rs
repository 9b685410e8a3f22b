//! Random operators, states and measurements for property tests and
//! soundness checks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{jacobi_eigh, Matrix, C64};
use crate::operators::{DensityMatrix, HermitianOperator, Povm, PureState};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    Matrix::from_row_major((0..dim * dim).map(|_| gaussian(rng)).collect()).unwrap()
}

/// Hermitian matrix from the Gaussian unitary ensemble (unnormalized).
pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::from_hermitian_unchecked(ginibre(dim, rng))
}

/// Haar-random pure state.
pub fn pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    PureState::normalized((0..dim).map(|_| gaussian(rng)).collect())
        .expect("gaussian vector is nonzero")
}

/// Mixed state `G G† / tr(G G†)` with `G` Ginibre.
pub fn density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityMatrix::new(HermitianOperator::from_hermitian_unchecked(gg.scale(1.0 / tr)))
        .expect("Wishart matrix is a valid state")
}

/// Unitary built from the eigenvectors of a random Hermitian matrix.
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let e = jacobi_eigh(&ginibre(dim, rng).hermitian_part());
    let mut u = Matrix::zeros(dim);
    for (j, v) in e.vectors.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            u[(i, j)] = *z;
        }
    }
    u
}

/// POVM with `outcomes` random labels in `[-2, 2]` and elements
/// `S^{-1/2} A_k S^{-1/2}` for random positive `A_k`, `S = Σ A_k`.
pub fn povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Povm {
    let raw: Vec<Matrix> = (0..outcomes)
        .map(|_| {
            let g = ginibre(dim, rng);
            &g * &g.adjoint()
        })
        .collect();
    let mut sum = Matrix::zeros(dim);
    for a in &raw {
        sum = &sum + a;
    }
    let e = jacobi_eigh(&sum);
    let mut inv_sqrt = Matrix::zeros(dim);
    for (lam, v) in e.values.iter().zip(&e.vectors) {
        inv_sqrt = &inv_sqrt + &Matrix::outer(v, v).scale(lam.powf(-0.5));
    }
    let elements = raw
        .iter()
        .map(|a| HermitianOperator::from_hermitian_unchecked(&(&inv_sqrt * a) * &inv_sqrt))
        .collect();
    let labels = (0..outcomes).map(|_| rng.random_range(-2.0..2.0)).collect();
    Povm::new(labels, elements).expect("normalized random POVM is valid")
}
