//! Tangent-space feature extraction: norm-preserving vectorization of the
//! upper triangle and the parametrized transport-then-log map, assembled
//! into feature matrices across domains and frequency bins.

use nalgebra::{DMatrix, DVector};

use crate::dataio::RecordingSet;
use crate::error::{Error, Result, ResultExt};
use crate::manifold::{riemannian_mean, MeanConfig};
use crate::real::Real;
use crate::spd::{EigenPair, SpdMatrix, SymMatrix};

/// Length of the vectorized upper triangle for a d×d symmetric matrix.
pub fn uvect_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Vectorizes the upper triangle row-major with off-diagonal entries scaled
/// by √2, so the Euclidean norm of the output equals the Frobenius norm of
/// the input: `(s₁₁, √2·s₁₂, …, √2·s₁d, s₂₂, …, s_dd)`.
pub fn uvect<T: Real>(s: &SymMatrix<T>) -> DVector<T> {
    let d = s.dim();
    let sqrt2 = T::of(2.0).sqrt();
    let mut out = DVector::zeros(uvect_len(d));
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            out[idx] = if i == j { s[(i, j)] } else { sqrt2 * s[(i, j)] };
            idx += 1;
        }
    }
    out
}

/// Transport-then-log features of a single matrix:
/// `φ(Σ, Σ̄, α) = uvect(log(Σ̄^{-α/2} Σ Σ̄^{-α/2}))`.
///
/// `α = 0` leaves the matrix untouched (raw log features); `α = 1` is the
/// classical re-centering to the identity.
pub fn phi<T: Real>(s: &SpdMatrix<T>, mean: &SpdMatrix<T>, alpha: T) -> Result<DVector<T>> {
    if s.dim() != mean.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}", mean.dim()),
            got: format!("{}", s.dim()),
        });
    }
    if alpha == T::zero() {
        return Ok(uvect(&s.log()?));
    }
    let whitener = transport_whitener(&mean.eig(), alpha)?;
    phi_whitened(s, &whitener)
}

/// `Σ̄^{-α/2}` from a cached eigendecomposition of the mean.
pub(crate) fn transport_whitener<T: Real>(
    mean_eig: &EigenPair<T>,
    alpha: T,
) -> Result<DMatrix<T>> {
    if mean_eig.min_eigenvalue() <= T::zero() {
        return Err(Error::NotPositiveDefinite(
            "transport base has a non-positive eigenvalue".into(),
        ));
    }
    let half = T::of(-0.5);
    Ok(mean_eig.reconstruct_with(|l| l.powf(alpha * half)))
}

/// φ for a precomputed whitener `W = Σ̄^{-α/2}`.
pub(crate) fn phi_whitened<T: Real>(s: &SpdMatrix<T>, w: &DMatrix<T>) -> Result<DVector<T>> {
    let transported = SymMatrix::from_nearly_symmetric(w * s.as_matrix() * w);
    let transported = SpdMatrix::from_sym_unchecked(transported);
    Ok(uvect(&transported.log()?))
}

/// Per-domain, per-frequency Riemannian means (a complete K×F grid), with
/// cached eigendecompositions for the transport powers.
#[derive(Debug, Clone)]
pub struct DomainMeans<T: Real = f64> {
    domain_ids: Vec<String>,
    means: Vec<Vec<SpdMatrix<T>>>,
    eigs: Vec<Vec<EigenPair<T>>>,
    n_freqs: usize,
}

impl<T: Real> DomainMeans<T> {
    pub fn new(domain_ids: Vec<String>, means: Vec<Vec<SpdMatrix<T>>>) -> Result<Self> {
        if domain_ids.len() != means.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} domain ids for {} mean rows",
                domain_ids.len(),
                means.len()
            )));
        }
        let n_freqs = means.first().map(|row| row.len()).unwrap_or(0);
        if n_freqs == 0 {
            return Err(Error::invalid_input("mean grid must be non-empty"));
        }
        let dim = means[0][0].dim();
        for (id, row) in domain_ids.iter().zip(&means) {
            if row.len() != n_freqs {
                return Err(Error::ShapeMismatch(format!(
                    "domain {id}: {} mean slices, expected {n_freqs}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|m| m.dim() != dim) {
                return Err(Error::ShapeMismatch(format!(
                    "domain {id}: mean dimension {} != {dim}",
                    bad.dim()
                )));
            }
        }
        let eigs = means
            .iter()
            .map(|row| row.iter().map(|m| m.eig()).collect())
            .collect();
        Ok(DomainMeans {
            domain_ids,
            means,
            eigs,
            n_freqs,
        })
    }

    /// A 1×F grid (e.g. a pooled source mean or a target mean).
    pub fn single(domain_id: impl Into<String>, row: Vec<SpdMatrix<T>>) -> Result<Self> {
        Self::new(vec![domain_id.into()], vec![row])
    }

    /// Replicates one mean row across several domains (pooled-mean methods).
    pub fn broadcast(&self, domain_ids: &[String]) -> Result<Self> {
        if self.n_domains() != 1 {
            return Err(Error::invalid_input(
                "broadcast requires a single-row mean grid",
            ));
        }
        DomainMeans::new(
            domain_ids.to_vec(),
            vec![self.means[0].clone(); domain_ids.len()],
        )
    }

    pub fn n_domains(&self) -> usize {
        self.domain_ids.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.n_freqs
    }

    pub fn dim(&self) -> usize {
        self.means[0][0].dim()
    }

    pub fn domain_ids(&self) -> &[String] {
        &self.domain_ids
    }

    pub fn get(&self, domain: usize, freq: usize) -> &SpdMatrix<T> {
        &self.means[domain][freq]
    }

    pub(crate) fn eig(&self, domain: usize, freq: usize) -> &EigenPair<T> {
        &self.eigs[domain][freq]
    }

    pub fn domain_index(&self, id: &str) -> Option<usize> {
        self.domain_ids.iter().position(|x| x == id)
    }
}

/// Computes the K×F grid of per-domain, per-frequency Riemannian means.
/// Frequency bins are treated independently.
pub fn compute_domain_means(
    domains: &[RecordingSet],
    cfg: &MeanConfig<f64>,
) -> Result<DomainMeans<f64>> {
    if domains.is_empty() {
        return Err(Error::invalid_input("no domains given"));
    }
    let mut ids = Vec::with_capacity(domains.len());
    let mut grid = Vec::with_capacity(domains.len());
    for set in domains {
        ids.push(set.domain_id().to_string());
        grid.push(per_frequency_means(set, cfg)?);
    }
    DomainMeans::new(ids, grid)
}

/// Per-frequency means of a single collection of recordings.
pub fn per_frequency_means(
    set: &RecordingSet,
    cfg: &MeanConfig<f64>,
) -> Result<Vec<SpdMatrix<f64>>> {
    (0..set.n_freqs())
        .map(|f| {
            let slices: Vec<SpdMatrix<f64>> = set
                .recordings()
                .iter()
                .map(|r| r.slices[f].clone())
                .collect();
            riemannian_mean(&slices, cfg)
                .map_err(Error::from)
                .context(format!("domain {}, frequency {f}", set.domain_id()))
        })
        .collect()
}

/// Pooled per-frequency means over all recordings of all given domains,
/// ignoring site boundaries.
pub fn compute_pooled_means(
    domains: &[RecordingSet],
    cfg: &MeanConfig<f64>,
) -> Result<Vec<SpdMatrix<f64>>> {
    let first = domains
        .first()
        .ok_or_else(|| Error::invalid_input("no domains given"))?;
    (0..first.n_freqs())
        .map(|f| {
            let slices: Vec<SpdMatrix<f64>> = domains
                .iter()
                .flat_map(|set| set.recordings().iter().map(move |r| r.slices[f].clone()))
                .collect();
            riemannian_mean(&slices, cfg)
                .map_err(Error::from)
                .context(format!("pooled mean, frequency {f}"))
        })
        .collect()
}

/// Stacked tangent-space features: one row per recording, `F·d(d+1)/2`
/// columns (per-bin φ outputs concatenated in ascending frequency order).
#[derive(Debug, Clone)]
pub struct FeatureMatrix<T: Real = f64> {
    data: DMatrix<T>,
    row_domain: Vec<String>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(data: DMatrix<T>, row_domain: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::invalid_input("feature matrix needs at least one row"));
        }
        if row_domain.len() != data.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} domain labels for {} rows",
                row_domain.len(),
                data.nrows()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid_input("feature matrix has non-finite entries"));
        }
        Ok(FeatureMatrix { data, row_domain })
    }

    pub fn from_matrix(data: DMatrix<T>) -> Result<Self> {
        let labels = vec![String::new(); data.nrows()];
        Self::new(data, labels)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn row_domain(&self) -> &[String] {
        &self.row_domain
    }
}

/// Featurizes one recording set against row `k` of a mean grid at transport
/// fraction `alpha`.
pub(crate) fn featurize_against(
    set: &RecordingSet,
    means: &DomainMeans<f64>,
    k: usize,
    alpha: f64,
) -> Result<FeatureMatrix<f64>> {
    let d = set.dim();
    let width = set.n_freqs() * uvect_len(d);
    let mut data = DMatrix::zeros(set.len(), width);
    let whiteners = (0..set.n_freqs())
        .map(|f| transport_whitener(means.eig(k, f), alpha))
        .collect::<Result<Vec<_>>>()?;
    for (row, rec) in set.recordings().iter().enumerate() {
        for (f, w) in whiteners.iter().enumerate() {
            let v = phi_whitened(&rec.slices[f], w).context(format!(
                "domain {}, subject {}, frequency {f}",
                set.domain_id(),
                rec.subject_id
            ))?;
            let start = f * uvect_len(d);
            for (j, x) in v.iter().enumerate() {
                data[(row, start + j)] = *x;
            }
        }
    }
    FeatureMatrix::new(data, vec![set.domain_id().to_string(); set.len()])
}

/// Concatenated labels in domain order then recording order, mirroring the
/// feature-matrix row order. Fails on unlabeled recordings.
pub(crate) fn stacked_labels(domains: &[RecordingSet]) -> Result<Vec<f64>> {
    let mut y = Vec::with_capacity(domains.iter().map(|s| s.len()).sum());
    for set in domains {
        for rec in set.recordings() {
            y.push(rec.age.ok_or_else(|| {
                Error::invalid_input(format!(
                    "unlabeled recording {} in training domain {}",
                    rec.subject_id,
                    set.domain_id()
                ))
            })?);
        }
    }
    Ok(y)
}

/// Assembles the feature matrix for `domains` with one transport parameter
/// `γ_k` per domain (`α_k = σ(γ_k)`, shared across all frequency bins).
/// Rows follow domain order, then within-domain recording order.
pub fn build_feature_matrix(
    domains: &[RecordingSet],
    means: &DomainMeans<f64>,
    gammas: &[f64],
) -> Result<FeatureMatrix<f64>> {
    let alphas: Vec<f64> = gammas.iter().map(|&g| crate::gopsa::sigmoid(g)).collect();
    build_feature_matrix_with_alphas(domains, means, &alphas)
}

/// Same as [`build_feature_matrix`] but with explicit transport fractions,
/// used by the baselines where `α` is pinned to 0 or 1.
pub fn build_feature_matrix_with_alphas(
    domains: &[RecordingSet],
    means: &DomainMeans<f64>,
    alphas: &[f64],
) -> Result<FeatureMatrix<f64>> {
    if domains.len() != alphas.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} transport parameters", domains.len()),
            got: format!("{}", alphas.len()),
        });
    }
    if domains.len() != means.n_domains() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} mean rows", domains.len()),
            got: format!("{}", means.n_domains()),
        });
    }
    let first = domains
        .first()
        .ok_or_else(|| Error::invalid_input("no domains given"))?;
    let (d, n_freqs) = (first.dim(), first.n_freqs());
    let width = n_freqs * uvect_len(d);
    let total_rows: usize = domains.iter().map(|s| s.len()).sum();

    let mut data = DMatrix::zeros(total_rows, width);
    let mut row_domain = Vec::with_capacity(total_rows);
    let mut row = 0;
    for (k, set) in domains.iter().enumerate() {
        if set.dim() != d || set.n_freqs() != n_freqs {
            return Err(Error::ShapeMismatch(format!(
                "domain {} has shape ({}, {})",
                set.domain_id(),
                set.dim(),
                set.n_freqs()
            )));
        }
        let whiteners = (0..n_freqs)
            .map(|f| transport_whitener(means.eig(k, f), alphas[k]))
            .collect::<Result<Vec<_>>>()
            .context(format!("domain {}", set.domain_id()))?;
        for rec in set.recordings() {
            for (f, w) in whiteners.iter().enumerate() {
                let vec = phi_whitened(&rec.slices[f], w).context(format!(
                    "domain {}, subject {}, frequency {f}",
                    set.domain_id(),
                    rec.subject_id
                ))?;
                let start = f * uvect_len(d);
                for (j, v) in vec.iter().enumerate() {
                    data[(row, start + j)] = *v;
                }
            }
            row_domain.push(set.domain_id().to_string());
            row += 1;
        }
    }
    FeatureMatrix::new(data, row_domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Recording;
    use crate::testutil::{random_spd, random_sym};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn set_from_slices(id: &str, slices: Vec<Vec<SpdMatrix<f64>>>, ages: &[f64]) -> RecordingSet {
        let recordings = slices
            .into_iter()
            .zip(ages)
            .enumerate()
            .map(|(i, (s, &age))| Recording {
                subject_id: format!("{id}-{i:03}"),
                slices: s,
                age: Some(age),
            })
            .collect();
        RecordingSet::new(id, recordings).unwrap()
    }

    #[test]
    fn uvect_identity() {
        let i2 = SymMatrix::<f64>::from_diagonal(&[1.0, 1.0]);
        let v = uvect(&i2);
        assert_eq!(v.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn uvect_analytic_offdiagonal() {
        let s = SymMatrix::new(nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]))
            .unwrap();
        let v = uvect(&s);
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(v[1], 2.0 * 2.0f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(v[2], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn uvect_preserves_norm() {
        let mut rng = StdRng::seed_from_u64(1);
        for d in [2usize, 4, 6] {
            let s = random_sym(d, &mut rng);
            let v = uvect(&s);
            assert_relative_eq!(v.norm(), s.norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn uvect_is_linear() {
        let mut rng = StdRng::seed_from_u64(2);
        let s1 = random_sym(3, &mut rng);
        let s2 = random_sym(3, &mut rng);
        let (a, b) = (1.3, -0.7);
        let combined = SymMatrix::new(s1.as_matrix() * a + s2.as_matrix() * b).unwrap();
        let lhs = uvect(&combined);
        let rhs = uvect(&s1) * a + uvect(&s2) * b;
        assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn phi_at_mean_with_full_transport_is_zero() {
        let mut rng = StdRng::seed_from_u64(3);
        let s = random_spd(3, &mut rng);
        let v = phi(&s, &s, 1.0).unwrap();
        assert!(v.norm() <= 1e-10);
    }

    #[test]
    fn phi_alpha_zero_is_raw_log() {
        let mut rng = StdRng::seed_from_u64(4);
        let s = random_spd(3, &mut rng);
        let mean = random_spd(3, &mut rng);
        let v = phi(&s, &mean, 0.0).unwrap();
        let raw = uvect(&s.log().unwrap());
        assert_eq!(v, raw, "alpha = 0 must ignore the mean entirely");
    }

    #[test]
    fn phi_diagonal_analytic() {
        let e = std::f64::consts::E;
        let mean = SpdMatrix::from_diagonal(&[4.0, 4.0]).unwrap();
        let s = SpdMatrix::from_diagonal(&[4.0 * e * e, 4.0]).unwrap();
        let v = phi(&s, &mean, 1.0).unwrap();
        assert_relative_eq!(v[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(v[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phi_continuous_in_alpha() {
        // Central-difference slope is finite and stable across step sizes.
        let mut rng = StdRng::seed_from_u64(5);
        let s = random_spd(3, &mut rng);
        let mean = random_spd(3, &mut rng);
        let alpha = 0.4;
        let mut slopes = Vec::new();
        for h in [1e-4, 1e-5] {
            let hi = phi(&s, &mean, alpha + h).unwrap();
            let lo = phi(&s, &mean, alpha - h).unwrap();
            slopes.push((hi - lo).norm() / (2.0 * h));
        }
        assert!(slopes[0].is_finite() && slopes[0] > 0.0);
        assert_relative_eq!(slopes[0], slopes[1], max_relative = 1e-3);
    }

    #[test]
    fn phi_endpoints_match_raw_and_recentred_features() {
        let mut rng = StdRng::seed_from_u64(6);
        let s = random_spd(3, &mut rng);
        let mean = random_spd(3, &mut rng);
        let at0 = phi(&s, &mean, 0.0).unwrap();
        assert_eq!(at0, uvect(&s.log().unwrap()));
        let at1 = phi(&s, &mean, 1.0).unwrap();
        let recentred = crate::manifold::parallel_transport_to_identity(&s, &mean, 1.0).unwrap();
        let expected = uvect(&recentred.log().unwrap());
        assert!((at1 - expected).norm() <= 1e-12);
    }

    #[test]
    fn domain_means_single_recording() {
        let mut rng = StdRng::seed_from_u64(7);
        let slices = vec![vec![random_spd(2, &mut rng), random_spd(2, &mut rng)]];
        let set = set_from_slices("one", slices.clone(), &[33.0]);
        let means = compute_domain_means(&[set], &MeanConfig::default()).unwrap();
        assert_eq!(means.get(0, 0).as_matrix(), slices[0][0].as_matrix());
        assert_eq!(means.get(0, 1).as_matrix(), slices[0][1].as_matrix());
    }

    #[test]
    fn domain_means_duplication_invariant() {
        let mut rng = StdRng::seed_from_u64(8);
        let base: Vec<Vec<SpdMatrix<f64>>> = (0..3)
            .map(|_| vec![random_spd(2, &mut rng)])
            .collect();
        let doubled: Vec<Vec<SpdMatrix<f64>>> =
            base.iter().chain(base.iter()).cloned().collect();
        let set1 = set_from_slices("a", base, &[1.0, 2.0, 3.0]);
        let set2 = set_from_slices("a", doubled, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let m1 = compute_domain_means(std::slice::from_ref(&set1), &MeanConfig::default()).unwrap();
        let m2 = compute_domain_means(std::slice::from_ref(&set2), &MeanConfig::default()).unwrap();
        let err = (m1.get(0, 0).as_matrix() - m2.get(0, 0).as_matrix()).norm();
        assert!(err <= 1e-9);
    }

    #[test]
    fn domain_means_bins_are_independent() {
        let mut rng = StdRng::seed_from_u64(9);
        let per_rec: Vec<(SpdMatrix<f64>, SpdMatrix<f64>)> = (0..4)
            .map(|_| (random_spd(2, &mut rng), random_spd(2, &mut rng)))
            .collect();
        let fw: Vec<Vec<SpdMatrix<f64>>> = per_rec
            .iter()
            .map(|(a, b)| vec![a.clone(), b.clone()])
            .collect();
        let bw: Vec<Vec<SpdMatrix<f64>>> = per_rec
            .iter()
            .map(|(a, b)| vec![b.clone(), a.clone()])
            .collect();
        let ages = [1.0, 2.0, 3.0, 4.0];
        let m_fw = compute_domain_means(
            &[set_from_slices("x", fw, &ages)],
            &MeanConfig::default(),
        )
        .unwrap();
        let m_bw = compute_domain_means(
            &[set_from_slices("x", bw, &ages)],
            &MeanConfig::default(),
        )
        .unwrap();
        // Permuting bin order permutes the mean grid columns.
        assert_eq!(m_fw.get(0, 0).as_matrix(), m_bw.get(0, 1).as_matrix());
        assert_eq!(m_fw.get(0, 1).as_matrix(), m_bw.get(0, 0).as_matrix());
    }

    #[test]
    fn feature_matrix_zero_row_for_mean_recording_at_alpha_one() {
        let mut rng = StdRng::seed_from_u64(10);
        let s = random_spd(3, &mut rng);
        let set = set_from_slices("solo", vec![vec![s]], &[50.0]);
        let means = compute_domain_means(std::slice::from_ref(&set), &MeanConfig::default()).unwrap();
        // γ large enough that σ(γ) rounds to 1.
        let z = build_feature_matrix(std::slice::from_ref(&set), &means, &[60.0]).unwrap();
        assert_eq!(z.rows(), 1);
        assert!(z.matrix().row(0).norm() <= 1e-10);
    }

    #[test]
    fn feature_matrix_identity_means_ignore_gamma() {
        let mut rng = StdRng::seed_from_u64(11);
        let slices: Vec<Vec<SpdMatrix<f64>>> = (0..3)
            .map(|_| vec![random_spd(2, &mut rng)])
            .collect();
        let set = set_from_slices("idm", slices, &[1.0, 2.0, 3.0]);
        let means = DomainMeans::new(
            vec!["idm".into()],
            vec![vec![SpdMatrix::identity(2)]],
        )
        .unwrap();
        let z1 = build_feature_matrix(std::slice::from_ref(&set), &means, &[-3.0]).unwrap();
        let z2 = build_feature_matrix(std::slice::from_ref(&set), &means, &[2.5]).unwrap();
        assert_eq!(z1.matrix(), z2.matrix(), "identity means must make γ inert");
    }

    #[test]
    fn feature_matrix_rows_isolated_per_domain() {
        let mut rng = StdRng::seed_from_u64(12);
        let set_a = set_from_slices(
            "a",
            (0..2).map(|_| vec![random_spd(2, &mut rng)]).collect(),
            &[1.0, 2.0],
        );
        let set_b = set_from_slices(
            "b",
            (0..2).map(|_| vec![random_spd(2, &mut rng)]).collect(),
            &[3.0, 4.0],
        );
        let domains = vec![set_a, set_b];
        let means = compute_domain_means(&domains, &MeanConfig::default()).unwrap();
        let z1 = build_feature_matrix(&domains, &means, &[0.3, -1.0]).unwrap();
        let z2 = build_feature_matrix(&domains, &means, &[0.3, 2.0]).unwrap();
        // Perturbing γ_b leaves domain-a rows bit-identical.
        for row in 0..2 {
            assert_eq!(z1.matrix().row(row), z2.matrix().row(row));
        }
        assert_ne!(z1.matrix().row(2), z2.matrix().row(2));
        assert_eq!(z1.row_domain(), &["a", "a", "b", "b"]);
    }

    #[test]
    fn feature_matrix_concatenates_bins_in_order() {
        let mut rng = StdRng::seed_from_u64(13);
        let s0 = random_spd(2, &mut rng);
        let s1 = random_spd(2, &mut rng);
        let set = set_from_slices("c", vec![vec![s0.clone(), s1.clone()]], &[5.0]);
        let means = DomainMeans::new(
            vec!["c".into()],
            vec![vec![SpdMatrix::identity(2), SpdMatrix::identity(2)]],
        )
        .unwrap();
        let z = build_feature_matrix_with_alphas(std::slice::from_ref(&set), &means, &[1.0]).unwrap();
        let expected0 = uvect(&s0.log().unwrap());
        let expected1 = uvect(&s1.log().unwrap());
        for j in 0..3 {
            assert_relative_eq!(z.matrix()[(0, j)], expected0[j], epsilon = 1e-12);
            assert_relative_eq!(z.matrix()[(0, 3 + j)], expected1[j], epsilon = 1e-12);
        }
    }
}
