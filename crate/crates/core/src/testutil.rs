//! Shared helpers for unit tests.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand_distr::{Distribution, StandardNormal};

use crate::spd::{SpdMatrix, SymMatrix};

/// Well-conditioned random SPD matrix `A Aᵀ + I/2`.
pub(crate) fn random_spd(d: usize, rng: &mut StdRng) -> SpdMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let m = &a * a.transpose() + DMatrix::<f64>::identity(d, d) * 0.5;
    SpdMatrix::new(m).unwrap()
}

/// Random symmetric matrix with standard normal entries.
pub(crate) fn random_sym(d: usize, rng: &mut StdRng) -> SymMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    SymMatrix::new((&a + a.transpose()) * 0.5).unwrap()
}

/// Random invertible matrix (unsymmetric), for congruence tests.
pub(crate) fn random_invertible(d: usize, rng: &mut StdRng) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    // Diagonal dominance keeps it comfortably invertible.
    &a + DMatrix::<f64>::identity(d, d) * (d as f64)
}
