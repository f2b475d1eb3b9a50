//! Dual/primal ridge regression, prediction metrics, the variance-corrected
//! resampled t-test and per-combination score normalization.

use nalgebra::DVector;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::real::Real;

/// Fitted ridge coefficients. The intercept is unpenalized and zero when
/// fitting without one.
#[derive(Debug, Clone)]
pub struct RidgeModel<T: Real = f64> {
    pub coefficients: DVector<T>,
    pub intercept: T,
    pub lambda: T,
}

/// Which linear system backs the fit. `Auto` picks by `min(N, p)`; the two
/// routes agree and both stay available for cross-checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeRoute {
    Auto,
    /// `β = Zᵀ (λ I_N + Z Zᵀ)⁻¹ y` — cheaper when N ≤ p.
    Dual,
    /// `β = (Zᵀ Z + λ I_p)⁻¹ Zᵀ y` — cheaper when p < N.
    Primal,
}

/// Ridge fit with the automatically selected route.
pub fn ridge_fit<T: Real>(
    z: &FeatureMatrix<T>,
    y: &[T],
    lambda: T,
    fit_intercept: bool,
) -> Result<RidgeModel<T>> {
    ridge_fit_with_route(z, y, lambda, fit_intercept, RidgeRoute::Auto)
}

/// Ridge fit on an explicit route. With an intercept, columns and targets
/// are mean-centered before the solve and the intercept restores the means.
pub fn ridge_fit_with_route<T: Real>(
    z: &FeatureMatrix<T>,
    y: &[T],
    lambda: T,
    fit_intercept: bool,
    route: RidgeRoute,
) -> Result<RidgeModel<T>> {
    let n = z.rows();
    let p = z.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} targets"),
            got: format!("{}", y.len()),
        });
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid_input("ridge lambda must be positive and finite"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("targets contain non-finite values"));
    }

    let mut zc = z.matrix().clone();
    let mut yc = DVector::from_column_slice(y);
    let mut col_means = DVector::zeros(p);
    let mut y_mean = T::zero();
    if fit_intercept {
        let inv_n = T::one() / T::of(n as f64);
        for j in 0..p {
            let mean = zc.column(j).iter().copied().sum::<T>() * inv_n;
            col_means[j] = mean;
            for i in 0..n {
                zc[(i, j)] -= mean;
            }
        }
        y_mean = yc.iter().copied().sum::<T>() * inv_n;
        yc.add_scalar_mut(-y_mean);
    }

    let use_dual = match route {
        RidgeRoute::Dual => true,
        RidgeRoute::Primal => false,
        RidgeRoute::Auto => n <= p,
    };

    let coefficients = if use_dual {
        let mut gram = &zc * zc.transpose();
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let chol = gram.cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite("dual ridge system lost definiteness".into())
        })?;
        let weights = chol.solve(&yc);
        zc.transpose() * weights
    } else {
        let mut gram = zc.transpose() * &zc;
        for j in 0..p {
            gram[(j, j)] += lambda;
        }
        let rhs = zc.transpose() * &yc;
        let chol = gram.cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite("primal ridge system lost definiteness".into())
        })?;
        chol.solve(&rhs)
    };

    let intercept = if fit_intercept {
        y_mean - coefficients.dot(&col_means)
    } else {
        T::zero()
    };
    Ok(RidgeModel {
        coefficients,
        intercept,
        lambda,
    })
}

/// `ŷ = Z β + intercept`.
pub fn ridge_predict<T: Real>(model: &RidgeModel<T>, z: &FeatureMatrix<T>) -> Result<Vec<T>> {
    if z.cols() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} feature columns", model.coefficients.len()),
            got: format!("{}", z.cols()),
        });
    }
    let mut out = z.matrix() * &model.coefficients;
    out.add_scalar_mut(model.intercept);
    Ok(out.iter().copied().collect())
}

/// Coefficient of determination `R² = 1 − Σ(y−ŷ)²/Σ(y−ȳ)²`. Can be
/// negative; undefined for constant targets.
pub fn r2_score<T: Real>(y_true: &[T], y_pred: &[T]) -> Result<T> {
    check_paired(y_true, y_pred, 2)?;
    let n = T::of(y_true.len() as f64);
    let mean = y_true.iter().copied().sum::<T>() / n;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        ss_res += (t - p) * (t - p);
        ss_tot += (t - mean) * (t - mean);
    }
    if ss_tot == T::zero() {
        return Err(Error::UndefinedMetric(
            "R² undefined for constant targets".into(),
        ));
    }
    Ok(T::one() - ss_res / ss_tot)
}

/// Mean absolute error, in the units of `y`.
pub fn mae<T: Real>(y_true: &[T], y_pred: &[T]) -> Result<T> {
    check_paired(y_true, y_pred, 1)?;
    let n = T::of(y_true.len() as f64);
    Ok(y_true
        .iter()
        .zip(y_pred)
        .map(|(&t, &p)| (t - p).abs())
        .sum::<T>()
        / n)
}

/// Spearman's ρ: Pearson correlation of average ranks (ties share the mean
/// rank). Undefined when either side is constant.
pub fn spearman_rho<T: Real>(y_true: &[T], y_pred: &[T]) -> Result<T> {
    check_paired(y_true, y_pred, 2)?;
    let r1 = average_ranks(y_true);
    let r2 = average_ranks(y_pred);
    pearson(&r1, &r2).map(T::of)
}

fn check_paired<T: Real>(y_true: &[T], y_pred: &[T], min_len: usize) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}", y_true.len()),
            got: format!("{}", y_pred.len()),
        });
    }
    if y_true.len() < min_len {
        return Err(Error::invalid_input(format!(
            "need at least {min_len} observations, got {}",
            y_true.len()
        )));
    }
    if y_true
        .iter()
        .chain(y_pred.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::invalid_input("non-finite values in metric input"));
    }
    Ok(())
}

/// Average ranks (1-based); tied values share the mean of their positions.
fn average_ranks<T: Real>(values: &[T]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedMetric(
            "correlation undefined for constant input".into(),
        ));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Outcome of the variance-corrected resampled t-test.
#[derive(Debug, Clone, Serialize)]
pub struct TTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_diff: f64,
    pub n_splits: usize,
    pub test_fraction: f64,
    /// Zero-variance inputs: exact p of 1 (zero mean) or 0 (nonzero mean).
    pub degenerate: bool,
}

/// Corrected paired t-test for overlapping resampled splits:
/// `t = mean(d) / sqrt((1/J + ρ/(1−ρ)) · var(d))` with `ρ` the test
/// fraction, and a two-sided p-value from Student-t with `J−1` degrees of
/// freedom.
pub fn corrected_ttest(diffs: &[f64], test_fraction: f64) -> Result<TTestResult> {
    let j = diffs.len();
    if j < 2 {
        return Err(Error::invalid_input(
            "corrected t-test needs at least two paired differences",
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid_input(
            "test_fraction must lie strictly between 0 and 1",
        ));
    }
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("non-finite paired differences"));
    }
    let jf = j as f64;
    let mean = diffs.iter().sum::<f64>() / jf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (jf - 1.0);

    if var == 0.0 {
        let (statistic, p_value) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(TTestResult {
            statistic,
            p_value,
            mean_diff: mean,
            n_splits: j,
            test_fraction,
            degenerate: true,
        });
    }

    let correction = 1.0 / jf + test_fraction / (1.0 - test_fraction);
    let statistic = mean / (correction * var).sqrt();
    let dist = StudentsT::new(0.0, 1.0, jf - 1.0)
        .map_err(|e| Error::invalid_input(format!("t distribution: {e}")))?;
    let p_value = 2.0 * (1.0 - dist.cdf(statistic.abs()));
    Ok(TTestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        mean_diff: mean,
        n_splits: j,
        test_fraction,
        degenerate: false,
    })
}

/// The three reported prediction metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    R2,
    Mae,
    Spearman,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::R2, Metric::Mae, Metric::Spearman];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::R2 => "r2",
            Metric::Mae => "mae",
            Metric::Spearman => "spearman",
        }
    }

    /// MAE is a loss; the other two are scores.
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Metric::Mae)
    }
}

/// Per-(combination, split, method) evaluation scores.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub combination_id: String,
    pub split_id: usize,
    pub method: String,
    pub r2: f64,
    pub mae: f64,
    pub spearman: f64,
    /// Spearman was undefined (constant predictions) and reported as 0.
    pub spearman_degenerate: bool,
}

impl MetricRecord {
    pub fn metric_values(&self) -> [(Metric, f64); 3] {
        [
            (Metric::R2, self.r2),
            (Metric::Mae, self.mae),
            (Metric::Spearman, self.spearman),
        ]
    }

    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::R2 => self.r2,
            Metric::Mae => self.mae,
            Metric::Spearman => self.spearman,
        }
    }
}

/// A min-max normalized score cell.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizedRecord {
    pub combination_id: String,
    pub split_id: usize,
    pub method: String,
    pub metric: Metric,
    pub value: f64,
    /// All raw values in the group were equal; everything mapped to 0.5.
    pub degenerate: bool,
}

/// Min-max normalization per (combination, metric) across all methods and
/// splits: the group minimum maps to 0 and the maximum to 1. MAE keeps its
/// raw orientation (lower is still better after normalization).
pub fn minmax_normalize_per_combination(records: &[MetricRecord]) -> Vec<NormalizedRecord> {
    let mut combos: Vec<&str> = records.iter().map(|r| r.combination_id.as_str()).collect();
    combos.sort_unstable();
    combos.dedup();

    let mut out = Vec::with_capacity(records.len() * Metric::ALL.len());
    for combo in combos {
        for metric in Metric::ALL {
            let group: Vec<&MetricRecord> = records
                .iter()
                .filter(|r| r.combination_id == combo)
                .collect();
            let values: Vec<f64> = group.iter().map(|r| r.value(metric)).collect();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let degenerate = min == max;
            for (rec, value) in group.iter().zip(values) {
                let normalized = if degenerate {
                    0.5
                } else {
                    (value - min) / (max - min)
                };
                out.push(NormalizedRecord {
                    combination_id: rec.combination_id.clone(),
                    split_id: rec.split_id,
                    method: rec.method.clone(),
                    metric,
                    value: normalized,
                    degenerate,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn feature_matrix(data: DMatrix<f64>) -> FeatureMatrix<f64> {
        FeatureMatrix::from_matrix(data).unwrap()
    }

    fn random_problem(n: usize, p: usize, rng: &mut StdRng) -> (FeatureMatrix<f64>, Vec<f64>) {
        let z = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        (feature_matrix(z), y)
    }

    #[test]
    fn ridge_identity_design_analytic() {
        // Z = I_n, no intercept: β = y / (1 + λ).
        let n = 4;
        let z = feature_matrix(DMatrix::identity(n, n));
        let y = vec![2.0, -1.0, 0.5, 3.0];
        let lambda = 0.7;
        let model = ridge_fit(&z, &y, lambda, false).unwrap();
        for i in 0..n {
            assert_relative_eq!(model.coefficients[i], y[i] / (1.0 + lambda), epsilon = 1e-12);
        }
        assert_eq!(model.intercept, 0.0);
    }

    #[test]
    fn ridge_small_lambda_approaches_ols() {
        let mut rng = StdRng::seed_from_u64(1);
        let (z, y) = random_problem(40, 5, &mut rng);
        let model = ridge_fit(&z, &y, 1e-10, false).unwrap();
        // Normal-equations oracle.
        let zt = z.matrix().transpose();
        let ols = (&zt * z.matrix())
            .cholesky()
            .unwrap()
            .solve(&(&zt * DVector::from_column_slice(&y)));
        assert!((model.coefficients - ols).norm() <= 1e-6);
    }

    #[test]
    fn ridge_dual_equals_primal() {
        let mut rng = StdRng::seed_from_u64(2);
        for &(n, p) in &[(10usize, 30usize), (30, 10), (20, 20)] {
            for fit_intercept in [false, true] {
                let (z, y) = random_problem(n, p, &mut rng);
                let dual = ridge_fit_with_route(&z, &y, 0.5, fit_intercept, RidgeRoute::Dual)
                    .unwrap();
                let primal = ridge_fit_with_route(&z, &y, 0.5, fit_intercept, RidgeRoute::Primal)
                    .unwrap();
                let denom = primal.coefficients.norm().max(1e-12);
                let err = (&dual.coefficients - &primal.coefficients).norm() / denom;
                assert!(err <= 1e-8, "dual/primal mismatch {err:e} at ({n},{p})");
                assert_relative_eq!(dual.intercept, primal.intercept, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ridge_intercept_restores_means() {
        let mut rng = StdRng::seed_from_u64(3);
        let (z, mut y) = random_problem(25, 4, &mut rng);
        for v in &mut y {
            *v += 100.0;
        }
        let model = ridge_fit(&z, &y, 1.0, true).unwrap();
        let preds = ridge_predict(&model, &z).unwrap();
        let mean_y = y.iter().sum::<f64>() / y.len() as f64;
        let mean_pred = preds.iter().sum::<f64>() / preds.len() as f64;
        assert_relative_eq!(mean_y, mean_pred, epsilon = 1e-9);
    }

    #[test]
    fn predict_zero_features_gives_intercept() {
        let z = feature_matrix(DMatrix::zeros(3, 2));
        let model = RidgeModel {
            coefficients: DVector::from_column_slice(&[1.0, -2.0]),
            intercept: 7.5,
            lambda: 1.0,
        };
        let preds = ridge_predict(&model, &z).unwrap();
        assert_eq!(preds, vec![7.5, 7.5, 7.5]);
    }

    #[test]
    fn predict_zero_coefficients_gives_intercept() {
        let mut rng = StdRng::seed_from_u64(4);
        let (z, _) = random_problem(5, 3, &mut rng);
        let model = RidgeModel {
            coefficients: DVector::zeros(3),
            intercept: -1.25,
            lambda: 1.0,
        };
        let preds = ridge_predict(&model, &z).unwrap();
        assert!(preds.iter().all(|&p| p == -1.25));
    }

    #[test]
    fn ols_residuals_orthogonal_to_columns() {
        let mut rng = StdRng::seed_from_u64(5);
        let (z, y) = random_problem(30, 4, &mut rng);
        let model = ridge_fit(&z, &y, 1e-12, false).unwrap();
        let preds = ridge_predict(&model, &z).unwrap();
        let residual = DVector::from_iterator(30, y.iter().zip(&preds).map(|(t, p)| t - p));
        let inner = z.matrix().transpose() * residual;
        assert!(inner.norm() <= 1e-6, "residual projection {:e}", inner.norm());
    }

    #[test]
    fn ridge_rejects_bad_lambda_and_shapes() {
        let z = feature_matrix(DMatrix::identity(2, 2));
        assert!(ridge_fit(&z, &[1.0, 2.0], 0.0, false).is_err());
        assert!(ridge_fit(&z, &[1.0], 1.0, false).is_err());
        assert!(ridge_fit(&z, &[1.0, f64::NAN], 1.0, false).is_err());
    }

    #[test]
    fn r2_hand_cases() {
        assert_relative_eq!(
            r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        // Predicting the mean gives exactly zero.
        assert_relative_eq!(
            r2_score(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            r2_score(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]).unwrap(),
            -1.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn r2_undefined_for_constant_targets() {
        assert!(matches!(
            r2_score(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn mae_hand_cases() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn mae_shift_invariant() {
        let y = [1.0, 5.0, -2.0];
        let p = [0.5, 7.0, -2.5];
        let shifted_y: Vec<f64> = y.iter().map(|v| v + 11.0).collect();
        let shifted_p: Vec<f64> = p.iter().map(|v| v + 11.0).collect();
        assert_relative_eq!(
            mae(&y, &p).unwrap(),
            mae(&shifted_y, &shifted_p).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn spearman_hand_cases() {
        assert_relative_eq!(
            spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            spearman_rho(&[1.0, 2.0, 3.0], &[5.0, 0.0, -5.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn spearman_constant_is_undefined() {
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn spearman_ties_use_average_ranks() {
        // y = [1, 2, 2, 3]: tied middle values get rank 2.5 each.
        let ranks = average_ranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(ranks, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn ttest_all_zero_diffs() {
        let r = corrected_ttest(&[0.0; 5], 0.5).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn ttest_constant_nonzero_diffs_degenerate() {
        let r = corrected_ttest(&[1.0, 1.0], 0.5).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 0.0);
        assert!(r.statistic.is_infinite() && r.statistic > 0.0);
    }

    #[test]
    fn ttest_matches_direct_formula() {
        // J = 10, diffs = 1 ± 0.1 alternating, test fraction 0.2.
        let diffs: Vec<f64> = (0..10)
            .map(|i| 1.0 + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let tf = 0.2;
        let r = corrected_ttest(&diffs, tf).unwrap();
        // Direct scalar evaluation of the same formula.
        let j = 10.0;
        let mean = 1.0;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (j - 1.0);
        let expected_t = mean / ((1.0 / j + tf / (1.0 - tf)) * var).sqrt();
        assert_relative_eq!(r.statistic, expected_t, epsilon = 1e-12);
        let dist = StudentsT::new(0.0, 1.0, 9.0).unwrap();
        let expected_p = 2.0 * (1.0 - dist.cdf(expected_t.abs()));
        assert_relative_eq!(r.p_value, expected_p, epsilon = 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn ttest_statistic_shrinks_with_test_fraction() {
        let diffs = [0.8, 1.1, 0.9, 1.3, 1.0];
        let mut last = f64::INFINITY;
        for tf in [0.1, 0.3, 0.5, 0.7] {
            let t = corrected_ttest(&diffs, tf).unwrap().statistic;
            assert!(t < last, "statistic must shrink as the fraction grows");
            last = t;
        }
    }

    #[test]
    fn ttest_input_validation() {
        assert!(corrected_ttest(&[1.0], 0.5).is_err());
        assert!(corrected_ttest(&[1.0, 2.0], 0.0).is_err());
        assert!(corrected_ttest(&[1.0, 2.0], 1.0).is_err());
    }

    fn record(combo: &str, split: usize, method: &str, r2: f64) -> MetricRecord {
        MetricRecord {
            combination_id: combo.into(),
            split_id: split,
            method: method.into(),
            r2,
            mae: -r2,
            spearman: r2 / 2.0,
            spearman_degenerate: false,
        }
    }

    #[test]
    fn minmax_two_values() {
        let records = vec![record("c", 0, "a", 2.0), record("c", 0, "b", 4.0)];
        let normalized = minmax_normalize_per_combination(&records);
        let r2: Vec<f64> = normalized
            .iter()
            .filter(|n| n.metric == Metric::R2)
            .map(|n| n.value)
            .collect();
        assert_eq!(r2, vec![0.0, 1.0]);
    }

    #[test]
    fn minmax_affine_invariant() {
        let base = vec![
            record("c", 0, "a", 1.0),
            record("c", 1, "a", 3.0),
            record("c", 0, "b", 2.0),
        ];
        let scaled: Vec<MetricRecord> = base
            .iter()
            .map(|r| MetricRecord {
                r2: 5.0 * r.r2 - 2.0,
                mae: 5.0 * r.mae - 2.0,
                spearman: 5.0 * r.spearman - 2.0,
                ..r.clone()
            })
            .collect();
        let n1 = minmax_normalize_per_combination(&base);
        let n2 = minmax_normalize_per_combination(&scaled);
        for (a, b) in n1.iter().zip(&n2) {
            assert_relative_eq!(a.value, b.value, epsilon = 1e-12);
        }
    }

    #[test]
    fn minmax_degenerate_group_flagged() {
        let records = vec![
            record("c", 0, "a", 3.0),
            record("c", 0, "b", 3.0),
            record("c", 0, "c", 3.0),
        ];
        let normalized = minmax_normalize_per_combination(&records);
        for n in normalized.iter().filter(|n| n.metric == Metric::R2) {
            assert!(n.degenerate);
            assert_eq!(n.value, 0.5);
        }
    }

    #[test]
    fn minmax_groups_by_combination() {
        let records = vec![
            record("c1", 0, "a", 0.0),
            record("c1", 0, "b", 10.0),
            record("c2", 0, "a", 100.0),
            record("c2", 0, "b", 200.0),
        ];
        let normalized = minmax_normalize_per_combination(&records);
        for n in &normalized {
            if n.metric == Metric::R2 {
                assert!(n.value == 0.0 || n.value == 1.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_spearman_invariant_under_monotone_transform(seed in 0u64..500) {
            let mut rng = StdRng::seed_from_u64(seed);
            let y: Vec<f64> = (0..12).map(|_| rng.random_range(-5.0..5.0)).collect();
            let p: Vec<f64> = (0..12).map(|_| rng.random_range(-5.0..5.0)).collect();
            let rho = spearman_rho(&y, &p).unwrap();
            // exp is strictly increasing.
            let p2: Vec<f64> = p.iter().map(|v| v.exp()).collect();
            let rho2 = spearman_rho(&y, &p2).unwrap();
            prop_assert!((rho - rho2).abs() <= 1e-12);
        }

        #[test]
        fn prop_dual_primal_agree(seed in 0u64..100) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.random_range(3usize..40);
            let p = rng.random_range(2usize..30);
            let (z, y) = random_problem(n, p, &mut rng);
            let dual = ridge_fit_with_route(&z, &y, 0.3, true, RidgeRoute::Dual).unwrap();
            let primal = ridge_fit_with_route(&z, &y, 0.3, true, RidgeRoute::Primal).unwrap();
            let denom = primal.coefficients.norm().max(1e-12);
            prop_assert!((&dual.coefficients - &primal.coefficients).norm() / denom <= 1e-8);
        }
    }
}
