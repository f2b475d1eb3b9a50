//! Multi-source, test-time domain adaptation for regression from symmetric
//! positive definite (SPD) covariance matrices.
//!
//! The estimator jointly learns per-domain parallel transport along the
//! geodesic toward the identity and a shared ridge regression, then adapts to
//! an unlabeled target domain whose mean outcome is known. The crate ships
//! the full stack around it: affine-invariant SPD geometry, tangent-space
//! feature extraction, comparison baselines, a co-spectrum preprocessing
//! chain, dataset I/O with a synthetic generator, and the benchmark protocol
//! driven by the `gopsa` CLI.
//!
//! The numeric core is generic over the scalar type ([`real::Real`], `f32` or
//! `f64`); estimators, file formats and the benchmark protocol are fixed at
//! `f64`.

pub mod baselines;
pub mod benchmark;
pub mod dataio;
pub mod error;
pub mod features;
pub mod gopsa;
pub mod manifold;
pub mod model;
pub mod optim;
pub mod preprocess;
pub mod real;
pub mod regression;
pub mod spd;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use real::Real;
pub use spd::{EigenPair, SpdMatrix, SymMatrix};

/// `f32` aliases for the scalar-generic core types. The unparameterized
/// names default to `f64`.
pub type SymMatrix32 = spd::SymMatrix<f32>;
pub type SpdMatrix32 = spd::SpdMatrix<f32>;
pub type EigenPair32 = spd::EigenPair<f32>;
