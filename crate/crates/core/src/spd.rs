//! Dense symmetric / symmetric-positive-definite matrix algebra.
//!
//! Everything downstream (geodesics, tangent features, whitening) reduces to
//! eigendecompositions of small symmetric matrices plus spectral matrix
//! functions: log, exp and fractional powers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::real::Real;

/// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F` above which construction rejects
/// the input instead of silently symmetrizing. File round-trips introduce
/// last-bit asymmetry; anything larger is a caller bug.
pub const SYMMETRY_RTOL: f64 = 1e-8;

/// Default relative eigenvalue floor: a matrix is accepted as positive
/// definite when `λ_min > EPS_PD_RTOL · λ_max`.
pub const EPS_PD_RTOL: f64 = 1e-12;

/// A d×d symmetric matrix. Entries satisfy `m[(i,j)] == m[(j,i)]` exactly:
/// construction symmetrizes via `(M + Mᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Real = f64> {
    inner: DMatrix<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Builds from a square matrix, rejecting inputs whose relative asymmetry
    /// exceeds [`SYMMETRY_RTOL`].
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: "square, non-empty".into(),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid_input("matrix contains non-finite entries"));
        }
        let norm = m.norm();
        let asym = (&m - m.transpose()).norm();
        if norm > T::zero() && asym > T::of(SYMMETRY_RTOL) * norm {
            return Err(Error::invalid_input(format!(
                "matrix is not symmetric: relative asymmetry {:e}",
                (asym / norm).to_f64_lossy()
            )));
        }
        Ok(Self::from_nearly_symmetric(m))
    }

    /// Symmetrizes without an asymmetry check. Used where symmetry is
    /// guaranteed mathematically but float products leave last-bit skew.
    pub(crate) fn from_nearly_symmetric(m: DMatrix<T>) -> Self {
        let half = T::of(0.5);
        let sym = (&m + m.transpose()).map(|x| x * half);
        SymMatrix { inner: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        SymMatrix {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.inner
    }

    pub fn norm(&self) -> T {
        self.inner.norm()
    }

    pub fn trace(&self) -> T {
        self.inner.trace()
    }

    /// Eigendecomposition with eigenvalues sorted ascending.
    pub fn eig(&self) -> EigenPair<T> {
        let decomp = self.inner.clone().symmetric_eigen();
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            decomp.eigenvalues[a]
                .partial_cmp(&decomp.eigenvalues[b])
                .expect("finite eigenvalues")
        });
        let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| decomp.eigenvalues[i]));
        let mut eigenvectors = DMatrix::zeros(d, d);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &decomp.eigenvectors.column(src));
        }
        EigenPair {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Matrix exponential via the spectral map `λ ↦ exp(λ)`. The result is
    /// positive definite by construction.
    pub fn exp(&self) -> Result<SpdMatrix<T>> {
        let e = self.eig();
        let m = e.reconstruct_with(|l| l.exp());
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalOverflow(format!(
                "matrix exponential (largest eigenvalue {:e})",
                e.max_eigenvalue().to_f64_lossy()
            )));
        }
        Ok(SpdMatrix::from_sym_unchecked(SymMatrix::from_nearly_symmetric(m)))
    }

    /// Trace-scaled Tikhonov regularization `S + ρ·tr(S)/d·I`, falling back
    /// to `S + ρ·I` when the trace vanishes (e.g. the zero matrix).
    pub fn shrink(&self, rho: T) -> Result<SpdMatrix<T>> {
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::invalid_input(format!(
                "shrinkage coefficient must be positive and finite, got {:?}",
                rho.to_f64_lossy()
            )));
        }
        let d = self.dim();
        let t = self.trace();
        let ridge = if t > T::zero() {
            rho * t / T::of(d as f64)
        } else {
            rho
        };
        let mut m = self.inner.clone();
        for i in 0..d {
            m[(i, i)] += ridge;
        }
        SpdMatrix::new(m)
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;
    fn index(&self, idx: (usize, usize)) -> &T {
        &self.inner[idx]
    }
}

/// A d×d symmetric positive definite matrix: symmetric, with smallest
/// eigenvalue above a relative floor of the largest one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix<T: Real = f64> {
    sym: SymMatrix<T>,
}

impl<T: Real> SpdMatrix<T> {
    /// Validating constructor with the default eigenvalue floor
    /// [`EPS_PD_RTOL`].
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        Self::with_floor(m, T::of(EPS_PD_RTOL))
    }

    /// Validating constructor with a caller-chosen relative eigenvalue floor.
    pub fn with_floor(m: DMatrix<T>, eps_pd: T) -> Result<Self> {
        let sym = SymMatrix::new(m)?;
        let e = sym.eig();
        let min = e.min_eigenvalue();
        let max = e.max_eigenvalue();
        if !(max > T::zero()) || min <= eps_pd * max {
            return Err(Error::NotPositiveDefinite(format!(
                "eigenvalue range [{:e}, {:e}] below relative floor {:e}",
                min.to_f64_lossy(),
                max.to_f64_lossy(),
                eps_pd.to_f64_lossy()
            )));
        }
        Ok(SpdMatrix { sym })
    }

    pub fn from_sym(sym: SymMatrix<T>) -> Result<Self> {
        Self::new(sym.into_matrix())
    }

    /// Skips the eigenvalue check. Reserved for results that are positive
    /// definite by construction (spectral maps, congruences by invertible
    /// factors).
    pub(crate) fn from_sym_unchecked(sym: SymMatrix<T>) -> Self {
        SpdMatrix { sym }
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            sym: SymMatrix {
                inner: DMatrix::identity(dim, dim),
            },
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix<T> {
        &self.sym
    }

    pub fn into_sym(self) -> SymMatrix<T> {
        self.sym
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        self.sym.as_matrix()
    }

    pub fn norm(&self) -> T {
        self.sym.norm()
    }

    pub fn trace(&self) -> T {
        self.sym.trace()
    }

    pub fn eig(&self) -> EigenPair<T> {
        self.sym.eig()
    }

    /// Matrix logarithm via the spectral map `λ ↦ ln(λ)`.
    pub fn log(&self) -> Result<SymMatrix<T>> {
        let e = self.eig();
        if e.min_eigenvalue() <= T::zero() {
            return Err(Error::NotPositiveDefinite(format!(
                "matrix logarithm: eigenvalue {:e} <= 0",
                e.min_eigenvalue().to_f64_lossy()
            )));
        }
        Ok(SymMatrix::from_nearly_symmetric(
            e.reconstruct_with(|l| l.ln()),
        ))
    }

    /// Fractional power `Σ^a` via the spectral map `λ ↦ λ^a`; eigenvectors
    /// are unchanged, so `Σ^a Σ^b = Σ^{a+b}`.
    pub fn powf(&self, a: T) -> Result<SpdMatrix<T>> {
        if !a.is_finite() {
            return Err(Error::invalid_input("matrix power exponent must be finite"));
        }
        let e = self.eig();
        if e.min_eigenvalue() <= T::zero() {
            return Err(Error::NotPositiveDefinite(format!(
                "matrix power: eigenvalue {:e} <= 0",
                e.min_eigenvalue().to_f64_lossy()
            )));
        }
        let m = e.reconstruct_with(|l| l.powf(a));
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalOverflow("matrix power".into()));
        }
        Ok(SpdMatrix::from_sym_unchecked(SymMatrix::from_nearly_symmetric(m)))
    }

    pub fn inverse(&self) -> Result<SpdMatrix<T>> {
        self.powf(-T::one())
    }

    pub fn sqrt(&self) -> Result<SpdMatrix<T>> {
        self.powf(T::of(0.5))
    }

    pub fn inv_sqrt(&self) -> Result<SpdMatrix<T>> {
        self.powf(T::of(-0.5))
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for SpdMatrix<T> {
    type Output = T;
    fn index(&self, idx: (usize, usize)) -> &T {
        &self.sym[idx]
    }
}

impl<T: Real> From<SpdMatrix<T>> for SymMatrix<T> {
    fn from(s: SpdMatrix<T>) -> Self {
        s.sym
    }
}

/// Sorted eigendecomposition `M = Q Λ Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenPair<T: Real = f64> {
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
}

impl<T: Real> EigenPair<T> {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, column `j` paired with eigenvalue `j`.
    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues[self.dim() - 1]
    }

    /// Rebuilds `Q f(Λ) Qᵀ` for a scalar spectral map `f`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        scaled * self.eigenvectors.transpose()
    }

    /// `Q f(Λ) Qᵀ` as a validated symmetric matrix.
    pub fn map_to_sym(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        SymMatrix::from_nearly_symmetric(self.reconstruct_with(f))
    }
}
