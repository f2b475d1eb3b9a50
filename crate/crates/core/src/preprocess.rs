//! Co-spectrum preprocessing chain for cross-spectral EEG tensors:
//! common average reference, real-part extraction, global-scale-factor
//! correction, then shrinkage. The output of the chain is one SPD matrix per
//! frequency bin, ready for the manifold pipeline.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result, ResultExt};
use crate::spd::{SpdMatrix, SymMatrix};

/// Relative tolerance for the Hermitian check on input slices.
const HERMITIAN_RTOL: f64 = 1e-8;

pub type HermitianMatrix = DMatrix<Complex<f64>>;

/// One recording's cross-spectral tensor: `F` complex Hermitian d×d slices
/// at strictly increasing frequencies.
#[derive(Debug, Clone)]
pub struct CrossSpectralTensor {
    freqs: Vec<f64>,
    data: Vec<HermitianMatrix>,
    dim: usize,
}

impl CrossSpectralTensor {
    pub fn new(freqs: Vec<f64>, data: Vec<HermitianMatrix>) -> Result<Self> {
        if freqs.len() != data.len() || data.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} frequencies for {} slices",
                freqs.len(),
                data.len()
            )));
        }
        if !freqs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid_input("frequencies must be strictly increasing"));
        }
        let dim = data[0].nrows();
        for (f, slice) in data.iter().enumerate() {
            if slice.nrows() != dim || slice.ncols() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "slice {f} is {}x{}, expected {dim}x{dim}",
                    slice.nrows(),
                    slice.ncols()
                )));
            }
            if slice.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid_input(format!(
                    "slice {f} contains non-finite entries"
                )));
            }
            let norm = slice.norm();
            let herm_gap = (slice - slice.adjoint()).norm();
            if norm > 0.0 && herm_gap > HERMITIAN_RTOL * norm {
                return Err(Error::invalid_input(format!(
                    "slice {f} is not Hermitian (relative gap {:e})",
                    herm_gap / norm
                )));
            }
        }
        Ok(CrossSpectralTensor { freqs, data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn slices(&self) -> &[HermitianMatrix] {
        &self.data
    }
}

/// The preprocessed recording: SPD co-spectrum slices plus the recording's
/// global scale factor.
#[derive(Debug, Clone)]
pub struct CospectrumSet {
    pub slices: Vec<SpdMatrix<f64>>,
    pub gsf: f64,
    pub freqs: Vec<f64>,
}

/// Common average reference `S̃ = H S Hᵀ` with `H = I − 11ᵀ/d`. `H` is an
/// orthogonal projector, so the map is idempotent and zeroes row/column sums.
pub fn car(s: &HermitianMatrix) -> HermitianMatrix {
    let d = s.nrows();
    let inv_d = Complex::new(1.0 / d as f64, 0.0);
    let mut h = DMatrix::from_element(d, d, -inv_d);
    for i in 0..d {
        h[(i, i)] += Complex::new(1.0, 0.0);
    }
    &h * s * &h
}

/// Real part of a Hermitian slice (the co-spectrum), as a symmetric matrix.
pub fn real_part(s: &HermitianMatrix) -> Result<SymMatrix<f64>> {
    SymMatrix::new(s.map(|z| z.re))
}

/// Global-scale-factor correction: divides every slice by the geometric
/// mean `ζ̂` of all diagonal entries across slices and channels.
pub fn gsf_correct(slices: &[SymMatrix<f64>]) -> Result<(Vec<SymMatrix<f64>>, f64)> {
    if slices.is_empty() {
        return Err(Error::invalid_input("no slices to rescale"));
    }
    let d = slices[0].dim();
    let mut log_sum = 0.0;
    for (f, slice) in slices.iter().enumerate() {
        for c in 0..d {
            let v = slice[(c, c)];
            if !(v > 0.0) {
                return Err(Error::invalid_input(format!(
                    "non-positive power {v:e} at frequency {f}, channel {c}; \
                     rank collapse before shrinkage"
                )));
            }
            log_sum += v.ln();
        }
    }
    let zeta = (log_sum / (slices.len() * d) as f64).exp();
    let corrected = slices
        .iter()
        .map(|s| SymMatrix::new(s.as_matrix() / zeta))
        .collect::<Result<Vec<_>>>()?;
    Ok((corrected, zeta))
}

/// Full chain in the fixed order CAR → real part → GSF → shrinkage.
pub fn preprocess_recording(t: &CrossSpectralTensor, rho: f64) -> Result<CospectrumSet> {
    let cospectra = t
        .slices()
        .iter()
        .enumerate()
        .map(|(f, s)| real_part(&car(s)).context(format!("frequency index {f}")))
        .collect::<Result<Vec<_>>>()?;
    let (corrected, gsf) = gsf_correct(&cospectra)?;
    let slices = corrected
        .iter()
        .enumerate()
        .map(|(f, s)| s.shrink(rho).context(format!("frequency index {f}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(CospectrumSet {
        slices,
        gsf,
        freqs: t.freqs().to_vec(),
    })
}
