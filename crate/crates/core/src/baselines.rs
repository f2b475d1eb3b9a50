//! The four comparison methods: domain-aware dummy, no adaptation, classical
//! re-centering, and the per-domain-intercept mixed-effects baseline. All
//! share the tangent-feature and ridge plumbing.

use crate::dataio::RecordingSet;
use crate::error::{Error, Result};
use crate::features::{
    compute_domain_means, compute_pooled_means, featurize_against, per_frequency_means,
    stacked_labels, DomainMeans,
};
use crate::manifold::MeanConfig;
use crate::regression::{ridge_fit, ridge_predict, RidgeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Predicts the known target mean outcome for every recording.
    DoDummy,
    /// Tangent features at the pooled source mean; no per-domain correction.
    NoDa,
    /// Whitens every domain (source and target) by its own mean.
    Recenter,
    /// Pooled-mean features with one outcome intercept per domain.
    DoIntercept,
}

impl BaselineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::DoDummy => "dummy",
            BaselineKind::NoDa => "noda",
            BaselineKind::Recenter => "recenter",
            BaselineKind::DoIntercept => "dointercept",
        }
    }
}

/// A fitted baseline. Field presence follows the kind: the dummy carries
/// nothing, pooled-mean methods carry a 1×F grid, re-centering a K×F grid,
/// and the per-domain-intercept model the source `ȳ_k` values.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub ridge: Option<RidgeModel<f64>>,
    pub source_mean_grid: Option<DomainMeans<f64>>,
    pub source_domain_means_y: Option<Vec<(String, f64)>>,
}

impl BaselineModel {
    pub fn dim(&self) -> Option<usize> {
        self.source_mean_grid.as_ref().map(|g| g.dim())
    }
}

/// Constant predictions at the known target mean outcome.
pub fn do_dummy_predict(ybar_target: f64, n: usize) -> Vec<f64> {
    vec![ybar_target; n]
}

/// Fits the no-adaptation baseline: one pooled Riemannian mean per frequency
/// over all source recordings regardless of site, features
/// `φ(Σ, Σ̄_S, 1)`, ridge with intercept.
pub fn no_da_fit(
    domains: &[RecordingSet],
    lambda: f64,
    mean_cfg: &MeanConfig<f64>,
) -> Result<BaselineModel> {
    let pooled = DomainMeans::single("pooled", compute_pooled_means(domains, mean_cfg)?)?;
    no_da_fit_with_means(domains, pooled, lambda)
}

/// [`no_da_fit`] with a precomputed pooled mean row (reused across the λ
/// grid in cross-validation).
pub fn no_da_fit_with_means(
    domains: &[RecordingSet],
    pooled: DomainMeans<f64>,
    lambda: f64,
) -> Result<BaselineModel> {
    let (z, y) = pooled_features(domains, &pooled)?;
    let ridge = ridge_fit(&z, &y, lambda, true)?;
    Ok(BaselineModel {
        kind: BaselineKind::NoDa,
        ridge: Some(ridge),
        source_mean_grid: Some(pooled),
        source_domain_means_y: None,
    })
}

/// Target predictions with the source pooled mean (no target-side
/// adaptation at all).
pub fn no_da_predict(model: &BaselineModel, target: &RecordingSet) -> Result<Vec<f64>> {
    let (ridge, grid) = expect_parts(model, BaselineKind::NoDa)?;
    let z = featurize_against(target, grid, 0, 1.0)?;
    ridge_predict(ridge, &z)
}

/// Fits the re-centering baseline: per-domain per-frequency means, features
/// `φ(Σ_{k,i}, Σ̄_k, 1)`, ridge with intercept.
pub fn recenter_fit(
    domains: &[RecordingSet],
    lambda: f64,
    mean_cfg: &MeanConfig<f64>,
) -> Result<BaselineModel> {
    let means = compute_domain_means(domains, mean_cfg)?;
    recenter_fit_with_means(domains, means, lambda)
}

/// [`recenter_fit`] with a precomputed per-domain mean grid.
pub fn recenter_fit_with_means(
    domains: &[RecordingSet],
    means: DomainMeans<f64>,
    lambda: f64,
) -> Result<BaselineModel> {
    let z = crate::features::build_feature_matrix_with_alphas(
        domains,
        &means,
        &vec![1.0; domains.len()],
    )?;
    let y = stacked_labels(domains)?;
    let ridge = ridge_fit(&z, &y, lambda, true)?;
    Ok(BaselineModel {
        kind: BaselineKind::Recenter,
        ridge: Some(ridge),
        source_mean_grid: Some(means),
        source_domain_means_y: None,
    })
}

/// In-source predictions for cross-validation: recordings of a known source
/// domain are whitened by that domain's training-side mean.
pub fn recenter_predict_in_domain(
    model: &BaselineModel,
    set: &RecordingSet,
) -> Result<Vec<f64>> {
    let (ridge, grid) = expect_parts(model, BaselineKind::Recenter)?;
    let k = grid.domain_index(set.domain_id()).ok_or_else(|| {
        Error::invalid_input(format!("domain {} not in the model", set.domain_id()))
    })?;
    let z = featurize_against(set, grid, k, 1.0)?;
    ridge_predict(ridge, &z)
}

/// Target predictions after re-centering the target with its own mean.
pub fn recenter_predict(
    model: &BaselineModel,
    target: &RecordingSet,
    mean_cfg: &MeanConfig<f64>,
) -> Result<Vec<f64>> {
    let (ridge, _) = expect_parts(model, BaselineKind::Recenter)?;
    let own = DomainMeans::single(
        target.domain_id().to_string(),
        per_frequency_means(target, mean_cfg)?,
    )?;
    let z = featurize_against(target, &own, 0, 1.0)?;
    ridge_predict(ridge, &z)
}

/// Fits the per-domain-intercept baseline: ridge on the residuals
/// `y_{k,i} − ȳ_k` over pooled-mean features, without a global intercept
/// (the per-domain `ȳ_k` plays that role).
pub fn do_intercept_fit(
    domains: &[RecordingSet],
    lambda: f64,
    mean_cfg: &MeanConfig<f64>,
) -> Result<BaselineModel> {
    let pooled = DomainMeans::single("pooled", compute_pooled_means(domains, mean_cfg)?)?;
    do_intercept_fit_with_means(domains, pooled, lambda)
}

/// [`do_intercept_fit`] with a precomputed pooled mean row.
pub fn do_intercept_fit_with_means(
    domains: &[RecordingSet],
    pooled: DomainMeans<f64>,
    lambda: f64,
) -> Result<BaselineModel> {
    let (z, y) = pooled_features(domains, &pooled)?;
    let mut domain_means_y = Vec::with_capacity(domains.len());
    let mut centered = Vec::with_capacity(y.len());
    let mut offset = 0;
    for set in domains {
        let ybar = set.mean_age().ok_or_else(|| {
            Error::invalid_input(format!("domain {} has no labeled recordings", set.domain_id()))
        })?;
        for _ in 0..set.len() {
            centered.push(y[offset] - ybar);
            offset += 1;
        }
        domain_means_y.push((set.domain_id().to_string(), ybar));
    }
    let ridge = ridge_fit(&z, &centered, lambda, false)?;
    Ok(BaselineModel {
        kind: BaselineKind::DoIntercept,
        ridge: Some(ridge),
        source_mean_grid: Some(pooled),
        source_domain_means_y: Some(domain_means_y),
    })
}

/// Target predictions with a fresh intercept
/// `β₀_T = ȳ_T − mean(βᵀφ(Σ_{T,i}, Σ̄_S))`, so the prediction mean matches
/// `ȳ_T` exactly.
pub fn do_intercept_predict(
    model: &BaselineModel,
    target: &RecordingSet,
    ybar_target: f64,
) -> Result<Vec<f64>> {
    let (ridge, grid) = expect_parts(model, BaselineKind::DoIntercept)?;
    let z = featurize_against(target, grid, 0, 1.0)?;
    let scores = ridge_predict(ridge, &z)?;
    let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
    let intercept = ybar_target - mean_score;
    Ok(scores.iter().map(|s| s + intercept).collect())
}

/// In-source predictions used by inner cross-validation: pooled-mean scores
/// plus that domain's training-side mean outcome.
pub fn do_intercept_predict_in_domain(
    model: &BaselineModel,
    set: &RecordingSet,
) -> Result<Vec<f64>> {
    let (ridge, grid) = expect_parts(model, BaselineKind::DoIntercept)?;
    let ybar = model
        .source_domain_means_y
        .as_ref()
        .and_then(|v| {
            v.iter()
                .find(|(id, _)| id == set.domain_id())
                .map(|(_, y)| *y)
        })
        .ok_or_else(|| {
            Error::invalid_input(format!("domain {} not in the model", set.domain_id()))
        })?;
    let z = featurize_against(set, grid, 0, 1.0)?;
    let scores = ridge_predict(ridge, &z)?;
    Ok(scores.iter().map(|s| s + ybar).collect())
}

fn pooled_features(
    domains: &[RecordingSet],
    pooled: &DomainMeans<f64>,
) -> Result<(crate::features::FeatureMatrix<f64>, Vec<f64>)> {
    let broadcast = pooled.broadcast(
        &domains
            .iter()
            .map(|s| s.domain_id().to_string())
            .collect::<Vec<_>>(),
    )?;
    let z = crate::features::build_feature_matrix_with_alphas(
        domains,
        &broadcast,
        &vec![1.0; domains.len()],
    )?;
    let y = stacked_labels(domains)?;
    Ok((z, y))
}

fn expect_parts(
    model: &BaselineModel,
    kind: BaselineKind,
) -> Result<(&RidgeModel<f64>, &DomainMeans<f64>)> {
    if model.kind != kind {
        return Err(Error::invalid_input(format!(
            "model is {}, expected {}",
            model.kind.as_str(),
            kind.as_str()
        )));
    }
    let ridge = model
        .ridge
        .as_ref()
        .ok_or_else(|| Error::invalid_input("model is missing ridge coefficients"))?;
    let grid = model
        .source_mean_grid
        .as_ref()
        .ok_or_else(|| Error::invalid_input("model is missing its mean grid"))?;
    Ok((ridge, grid))
}
