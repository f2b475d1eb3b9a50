//! Benchmark protocol: source/target site combinations, stratified shuffle
//! splits over the target data, nested-CV regularization selection on the
//! sources, per-method evaluation with pooled-target metrics, corrected
//! t-tests between methods, and table emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    do_dummy_predict, do_intercept_fit_with_means, do_intercept_predict,
    do_intercept_predict_in_domain, no_da_fit_with_means, no_da_predict, recenter_fit_with_means,
    recenter_predict, recenter_predict_in_domain, BaselineKind, BaselineModel,
};
use crate::dataio::{generate_synthetic, load_dataset_with, LoadOptions, RecordingSet, SynthConfig};
use crate::error::{Error, Result, ResultExt};
use crate::features::{compute_domain_means, compute_pooled_means, per_frequency_means, DomainMeans};
use crate::gopsa::{adapt_and_predict, sigmoid, train_with_means, GopsaModel, OptimizerConfig};
use crate::manifold::MeanConfig;
use crate::regression::{
    corrected_ttest, mae, minmax_normalize_per_combination, r2_score, spearman_rho, Metric,
    MetricRecord, NormalizedRecord, TTestResult,
};

/// The evaluated methods, in canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dummy,
    NoDa,
    Recenter,
    DoIntercept,
    Gopsa,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Dummy,
        Method::NoDa,
        Method::Recenter,
        Method::DoIntercept,
        Method::Gopsa,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dummy => "dummy",
            Method::NoDa => "noda",
            Method::Recenter => "recenter",
            Method::DoIntercept => "dointercept",
            Method::Gopsa => "gopsa",
        }
    }

    /// Needs a regularization parameter selected by inner CV.
    fn uses_lambda(&self) -> bool {
        !matches!(self, Method::Dummy)
    }

    fn all_methods() -> Vec<Method> {
        Method::ALL.to_vec()
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dummy" => Ok(Method::Dummy),
            "noda" => Ok(Method::NoDa),
            "recenter" => Ok(Method::Recenter),
            "dointercept" => Ok(Method::DoIntercept),
            "gopsa" => Ok(Method::Gopsa),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected dummy|noda|recenter|dointercept|gopsa)"
            ))),
        }
    }
}

/// Where the benchmark data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// A dataset directory (manifest + payloads).
    Directory {
        path: PathBuf,
        #[serde(default)]
        shrink_on_load: Option<f64>,
    },
    /// The built-in generator.
    Synthetic { config: SynthConfig },
}

impl DataSource {
    pub fn load(&self) -> Result<(Vec<RecordingSet>, Vec<f64>)> {
        match self {
            DataSource::Directory {
                path,
                shrink_on_load,
            } => load_dataset_with(
                path,
                &LoadOptions {
                    shrink: *shrink_on_load,
                },
            ),
            DataSource::Synthetic { config } => {
                Ok((generate_synthetic(config)?, config.freqs()))
            }
        }
    }
}

/// One source/target site assignment. Empty `targets` means "all remaining
/// sites".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteCombination {
    pub sources: Vec<String>,
    #[serde(default)]
    pub targets: Vec<String>,
}

impl SiteCombination {
    pub fn id(&self) -> String {
        self.sources.join(",")
    }
}

/// The default 7-point logarithmic grid from 1e-1 to 1e5.
pub fn default_lambda_grid() -> Vec<f64> {
    (-1..=5).map(|e: i32| 10f64.powi(e)).collect()
}

fn default_n_splits() -> usize {
    100
}

fn default_test_fraction() -> f64 {
    0.5
}

fn default_inner_cv_folds() -> usize {
    3
}

/// Full benchmark configuration; deserializable from a config file, with
/// protocol defaults for everything but the data source and combinations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub data: DataSource,
    pub combinations: Vec<SiteCombination>,
    #[serde(default = "default_n_splits")]
    pub n_splits: usize,
    /// Fraction of each target site drawn into a split's evaluation set.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_inner_cv_folds")]
    pub inner_cv_folds: usize,
    #[serde(default = "Method::all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl BenchmarkConfig {
    fn validate(&self) -> Result<()> {
        if self.combinations.is_empty() {
            return Err(Error::Config("no site combinations configured".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(
                "test_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("lambda grid must be non-empty and positive".into()));
        }
        if self.inner_cv_folds < 2 {
            return Err(Error::Config("inner_cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

/// Per-split evaluation indices: for each split, the `(site_index,
/// recording_index)` pairs forming the evaluation set. Each target site
/// contributes `round(test_fraction · n_site)` recordings per split, drawn
/// without replacement; split streams are independent of each other.
pub fn stratified_shuffle_split(
    targets: &[RecordingSet],
    n_splits: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if targets.is_empty() {
        return Err(Error::Config("no target sites to split".into()));
    }
    if n_splits == 0 {
        return Err(Error::Config("n_splits must be positive".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(
            "test_fraction must lie strictly between 0 and 1".into(),
        ));
    }
    for site in targets {
        if site.len() < 2 {
            return Err(Error::Config(format!(
                "target site {} has {} recording(s); need at least 2",
                site.domain_id(),
                site.len()
            )));
        }
    }
    let mut splits = Vec::with_capacity(n_splits);
    for split in 0..n_splits {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(split as u64 + 1);
        let mut eval = Vec::new();
        for (t, site) in targets.iter().enumerate() {
            let n = site.len();
            let k = ((test_fraction * n as f64).round() as usize).clamp(1, n);
            let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
            chosen.sort_unstable();
            eval.extend(chosen.into_iter().map(|i| (t, i)));
        }
        splits.push(eval);
    }
    Ok(splits)
}

/// Inner cross-validated selection of the ridge regularization on source
/// data only: stratified-by-site K folds, score = pooled validation R²,
/// ties broken toward the larger λ.
pub fn nested_cv_lambda(
    sources: &[RecordingSet],
    method: Method,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    optimizer: &OptimizerConfig,
) -> Result<f64> {
    if lambda_grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite lambdas"));
    if grid.len() == 1 || !method.uses_lambda() {
        return Ok(grid[0]);
    }
    if folds < 2 {
        return Err(Error::Config("need at least 2 inner folds".into()));
    }

    // Stratified fold assignment: shuffle within each site, deal round-robin.
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(sources.len());
    for (s, site) in sources.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1_000_000 + s as u64);
        let order: Vec<usize> =
            rand::seq::index::sample(&mut rng, site.len(), site.len()).into_vec();
        let mut fold_of = vec![0usize; site.len()];
        for (pos, &idx) in order.iter().enumerate() {
            fold_of[idx] = pos % folds;
        }
        assignments.push(fold_of);
    }

    let mut fold_scores: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    for fold in 0..folds {
        let mut train_sets = Vec::new();
        let mut val_sets = Vec::new();
        for (s, site) in sources.iter().enumerate() {
            let train_idx: Vec<usize> = (0..site.len())
                .filter(|&i| assignments[s][i] != fold)
                .collect();
            let val_idx: Vec<usize> = (0..site.len())
                .filter(|&i| assignments[s][i] == fold)
                .collect();
            if train_idx.is_empty() || val_idx.is_empty() {
                continue;
            }
            train_sets.push(site.subset(&train_idx)?);
            val_sets.push(site.subset(&val_idx)?);
        }
        if train_sets.is_empty() || val_sets.is_empty() {
            continue;
        }

        // Mean structures do not depend on λ; compute once per fold.
        let mean_cfg = MeanConfig::default();
        let pooled = match method {
            Method::NoDa | Method::DoIntercept => Some(DomainMeans::single(
                "pooled",
                compute_pooled_means(&train_sets, &mean_cfg)?,
            )?),
            _ => None,
        };
        let domain_means = match method {
            Method::Recenter | Method::Gopsa => {
                Some(compute_domain_means(&train_sets, &mean_cfg)?)
            }
            _ => None,
        };

        for (gi, &lambda) in grid.iter().enumerate() {
            let mut y_true = Vec::new();
            let mut y_pred = Vec::new();
            match method {
                Method::Dummy => unreachable!("dummy skips lambda selection"),
                Method::NoDa => {
                    let model =
                        no_da_fit_with_means(&train_sets, pooled.clone().unwrap(), lambda)?;
                    for val in &val_sets {
                        collect_labeled(val, &no_da_predict(&model, val)?, &mut y_true, &mut y_pred);
                    }
                }
                Method::Recenter => {
                    let model = recenter_fit_with_means(
                        &train_sets,
                        domain_means.clone().unwrap(),
                        lambda,
                    )?;
                    for val in &val_sets {
                        collect_labeled(
                            val,
                            &recenter_predict_in_domain(&model, val)?,
                            &mut y_true,
                            &mut y_pred,
                        );
                    }
                }
                Method::DoIntercept => {
                    let model = do_intercept_fit_with_means(
                        &train_sets,
                        pooled.clone().unwrap(),
                        lambda,
                    )?;
                    for val in &val_sets {
                        collect_labeled(
                            val,
                            &do_intercept_predict_in_domain(&model, val)?,
                            &mut y_true,
                            &mut y_pred,
                        );
                    }
                }
                Method::Gopsa => {
                    let model = train_with_means(
                        &train_sets,
                        domain_means.clone().unwrap(),
                        lambda,
                        optimizer,
                    )?;
                    for val in &val_sets {
                        collect_labeled(
                            val,
                            &model.predict_source_domain(val)?,
                            &mut y_true,
                            &mut y_pred,
                        );
                    }
                }
            }
            fold_scores[gi].push(r2_score(&y_true, &y_pred)?);
        }
    }

    let mut best = grid[0];
    let mut best_score = f64::NEG_INFINITY;
    for (gi, &lambda) in grid.iter().enumerate() {
        if fold_scores[gi].is_empty() {
            continue;
        }
        let score = fold_scores[gi].iter().sum::<f64>() / fold_scores[gi].len() as f64;
        if score >= best_score {
            best_score = score;
            best = lambda;
        }
    }
    Ok(best)
}

fn collect_labeled(set: &RecordingSet, preds: &[f64], y_true: &mut Vec<f64>, y_pred: &mut Vec<f64>) {
    for (rec, &p) in set.recordings().iter().zip(preds) {
        if let Some(age) = rec.age {
            y_true.push(age);
            y_pred.push(p);
        }
    }
}

/// Corrected t-test between two methods on one metric.
#[derive(Debug, Clone, Serialize)]
pub struct PairedTTestRecord {
    pub combination_id: String,
    pub method_a: String,
    pub method_b: String,
    pub metric: Metric,
    pub result: TTestResult,
}

/// Fitted transport fraction per site (Fig.-3B-style data).
#[derive(Debug, Clone, Serialize)]
pub struct AlphaRecord {
    pub combination_id: String,
    pub method: String,
    pub site: String,
    pub role: String,
    pub mean_age: Option<f64>,
    pub alpha: f64,
}

/// Per-site mean log-spectrum after each method's transport
/// (Fig.-3A-style data).
#[derive(Debug, Clone, Serialize)]
pub struct PsdRecord {
    pub combination_id: String,
    pub method: String,
    pub site: String,
    pub role: String,
    pub freq_index: usize,
    pub freq: f64,
    pub mean_log_power: f64,
}

/// Selected regularization per (combination, method).
#[derive(Debug, Clone, Serialize)]
pub struct LambdaRecord {
    pub combination_id: String,
    pub method: String,
    pub lambda: f64,
}

/// A cell that failed; the run continues without it.
#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub combination_id: String,
    pub split_id: Option<usize>,
    pub method: String,
    pub message: String,
}

/// Everything the protocol produces.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub records: Vec<MetricRecord>,
    pub ttests: Vec<PairedTTestRecord>,
    pub normalized: Vec<NormalizedRecord>,
    pub alphas: Vec<AlphaRecord>,
    pub psd: Vec<PsdRecord>,
    pub lambdas: Vec<LambdaRecord>,
    pub failures: Vec<CellFailure>,
    pub n_splits: usize,
    pub test_fraction: f64,
}

impl BenchmarkReport {
    /// Mean ± std (across splits) per combination, method and metric.
    pub fn summary(&self) -> serde_json::Value {
        let mut grouped: BTreeMap<(String, String), Vec<&MetricRecord>> = BTreeMap::new();
        for rec in &self.records {
            grouped
                .entry((rec.combination_id.clone(), rec.method.clone()))
                .or_default()
                .push(rec);
        }
        let mut combos: BTreeMap<String, serde_json::Value> = BTreeMap::new();
        for ((combo, method), records) in grouped {
            let mut metrics = serde_json::Map::new();
            for metric in Metric::ALL {
                let values: Vec<f64> = records.iter().map(|r| r.value(metric)).collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let std = if values.len() > 1 {
                    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
                        .sqrt()
                } else {
                    0.0
                };
                metrics.insert(
                    metric.as_str().to_string(),
                    serde_json::json!({
                        "mean": mean,
                        "std_across_splits": std,
                        "n_splits": values.len(),
                    }),
                );
            }
            let degenerate = records.iter().filter(|r| r.spearman_degenerate).count();
            combos
                .entry(combo)
                .or_insert_with(|| serde_json::json!({}))
                .as_object_mut()
                .unwrap()
                .insert(
                    method,
                    serde_json::json!({
                        "metrics": metrics,
                        "degenerate_spearman_splits": degenerate,
                    }),
                );
        }
        serde_json::json!({
            "n_splits": self.n_splits,
            "test_fraction": self.test_fraction,
            "std_definition": "sample std across splits",
            "failures": self.failures.len(),
            "combinations": combos,
        })
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

enum Fitted {
    Dummy,
    Baseline(BaselineModel),
    Gopsa(Box<GopsaModel>),
}

/// Loads the configured data source and runs the full protocol.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let (data, freqs) = cfg.data.load()?;
    run_benchmark_on(&data, &freqs, cfg)
}

/// Runs the protocol on in-memory data.
pub fn run_benchmark_on(
    data: &[RecordingSet],
    freqs: &[f64],
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let mut methods = Vec::new();
    for m in &cfg.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }

    let mut records = Vec::new();
    let mut ttests = Vec::new();
    let mut alphas = Vec::new();
    let mut psd = Vec::new();
    let mut lambdas = Vec::new();
    let mut failures = Vec::new();

    for combo in &cfg.combinations {
        let combination_id = combo.id();
        let (sources, targets) = resolve_combination(data, combo)?;

        let (fitted, combo_lambdas, fit_failures) =
            fit_methods(&sources, &methods, cfg, &combination_id);
        lambdas.extend(combo_lambdas);
        failures.extend(fit_failures);

        // Evaluate every split; splits are independent and run in parallel,
        // with all randomness derived from per-split streams.
        let splits =
            stratified_shuffle_split(&targets, cfg.n_splits, cfg.test_fraction, cfg.seed)?;
        let split_outputs: Vec<(Vec<MetricRecord>, Vec<CellFailure>)> = splits
            .par_iter()
            .enumerate()
            .map(|(split_id, eval)| {
                evaluate_split(
                    &combination_id,
                    split_id,
                    eval,
                    &targets,
                    &fitted,
                    &cfg.optimizer,
                )
            })
            .collect();
        for (recs, fails) in split_outputs {
            records.extend(recs);
            failures.extend(fails);
        }

        // Paired corrected t-tests for every method pair and metric.
        for i in 0..methods.len() {
            for j in (i + 1)..methods.len() {
                for metric in Metric::ALL {
                    let diffs = paired_diffs(
                        &records,
                        &combination_id,
                        methods[i].as_str(),
                        methods[j].as_str(),
                        metric,
                    );
                    if diffs.len() >= 2 {
                        match corrected_ttest(&diffs, cfg.test_fraction) {
                            Ok(result) => ttests.push(PairedTTestRecord {
                                combination_id: combination_id.clone(),
                                method_a: methods[i].as_str().into(),
                                method_b: methods[j].as_str().into(),
                                metric,
                                result,
                            }),
                            Err(e) => failures.push(CellFailure {
                                combination_id: combination_id.clone(),
                                split_id: None,
                                method: format!(
                                    "ttest {} vs {}",
                                    methods[i].as_str(),
                                    methods[j].as_str()
                                ),
                                message: e.to_string(),
                            }),
                        }
                    }
                }
            }
        }

        // Model-inspection tables on the full site data.
        if let Err(e) = inspect_combination(
            &combination_id,
            &sources,
            &targets,
            freqs,
            &fitted,
            &methods,
            &cfg.optimizer,
            &mut alphas,
            &mut psd,
        ) {
            failures.push(CellFailure {
                combination_id: combination_id.clone(),
                split_id: None,
                method: "inspection".into(),
                message: e.to_string(),
            });
        }
    }

    let normalized = minmax_normalize_per_combination(&records);
    Ok(BenchmarkReport {
        records,
        ttests,
        normalized,
        alphas,
        psd,
        lambdas,
        failures,
        n_splits: cfg.n_splits,
        test_fraction: cfg.test_fraction,
    })
}


/// Selects λ by inner CV and fits each requested method on the full source
/// data. Failures become report cells instead of aborting the run.
fn fit_methods(
    sources: &[RecordingSet],
    methods: &[Method],
    cfg: &BenchmarkConfig,
    combination_id: &str,
) -> (Vec<(Method, f64, Fitted)>, Vec<LambdaRecord>, Vec<CellFailure>) {
    let mut fitted = Vec::new();
    let mut lambdas = Vec::new();
    let mut failures = Vec::new();

    // Mean structures are shared across methods that need the same kind.
    let shared = (|| -> Result<(Option<DomainMeans<f64>>, Option<DomainMeans<f64>>)> {
        let mean_cfg = MeanConfig::default();
        let pooled = if methods
            .iter()
            .any(|m| matches!(m, Method::NoDa | Method::DoIntercept))
        {
            Some(DomainMeans::single(
                "pooled",
                compute_pooled_means(sources, &mean_cfg)?,
            )?)
        } else {
            None
        };
        let domain_means = if methods
            .iter()
            .any(|m| matches!(m, Method::Recenter | Method::Gopsa))
        {
            Some(compute_domain_means(sources, &mean_cfg)?)
        } else {
            None
        };
        Ok((pooled, domain_means))
    })();
    let (source_pooled, source_domain_means) = match shared {
        Ok(pair) => pair,
        Err(e) => {
            for method in methods {
                failures.push(CellFailure {
                    combination_id: combination_id.into(),
                    split_id: None,
                    method: method.as_str().into(),
                    message: format!("source means: {e}"),
                });
            }
            return (fitted, lambdas, failures);
        }
    };

    for &method in methods {
        let outcome = (|| -> Result<(f64, Fitted)> {
            let lambda = if method.uses_lambda() {
                nested_cv_lambda(
                    sources,
                    method,
                    &cfg.lambda_grid,
                    cfg.inner_cv_folds,
                    cfg.seed,
                    &cfg.optimizer,
                )?
            } else {
                f64::NAN
            };
            let model = match method {
                Method::Dummy => Fitted::Dummy,
                Method::NoDa => Fitted::Baseline(no_da_fit_with_means(
                    sources,
                    source_pooled.clone().expect("pooled means computed"),
                    lambda,
                )?),
                Method::Recenter => Fitted::Baseline(recenter_fit_with_means(
                    sources,
                    source_domain_means.clone().expect("domain means computed"),
                    lambda,
                )?),
                Method::DoIntercept => Fitted::Baseline(do_intercept_fit_with_means(
                    sources,
                    source_pooled.clone().expect("pooled means computed"),
                    lambda,
                )?),
                Method::Gopsa => Fitted::Gopsa(Box::new(train_with_means(
                    sources,
                    source_domain_means.clone().expect("domain means computed"),
                    lambda,
                    &cfg.optimizer,
                )?)),
            };
            Ok((lambda, model))
        })();
        match outcome {
            Ok((lambda, model)) => {
                if method.uses_lambda() {
                    lambdas.push(LambdaRecord {
                        combination_id: combination_id.into(),
                        method: method.as_str().into(),
                        lambda,
                    });
                }
                fitted.push((method, lambda, model));
            }
            Err(e) => failures.push(CellFailure {
                combination_id: combination_id.into(),
                split_id: None,
                method: method.as_str().into(),
                message: e.to_string(),
            }),
        }
    }
    (fitted, lambdas, failures)
}

/// Fits the α-bearing methods on one combination and returns the
/// model-inspection tables (per-site transport fractions and mean
/// log-spectra) without running any splits.
pub fn inspect_sites(
    data: &[RecordingSet],
    freqs: &[f64],
    combo: &SiteCombination,
    cfg: &BenchmarkConfig,
) -> Result<(Vec<AlphaRecord>, Vec<PsdRecord>)> {
    let combination_id = combo.id();
    let (sources, targets) = resolve_combination(data, combo)?;
    let mut methods = Vec::new();
    for m in &cfg.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let (fitted, _, failures) = fit_methods(&sources, &methods, cfg, &combination_id);
    if let Some(f) = failures.first() {
        return Err(Error::Config(format!(
            "fit failed for {}: {}",
            f.method, f.message
        )));
    }
    let mut alphas = Vec::new();
    let mut psd = Vec::new();
    inspect_combination(
        &combination_id,
        &sources,
        &targets,
        freqs,
        &fitted,
        &methods,
        &cfg.optimizer,
        &mut alphas,
        &mut psd,
    )?;
    Ok((alphas, psd))
}

fn resolve_combination(
    data: &[RecordingSet],
    combo: &SiteCombination,
) -> Result<(Vec<RecordingSet>, Vec<RecordingSet>)> {
    let find = |id: &str| -> Result<RecordingSet> {
        data.iter()
            .find(|s| s.domain_id() == id)
            .cloned()
            .ok_or_else(|| Error::Config(format!("site {id} not present in the dataset")))
    };
    if combo.sources.is_empty() {
        return Err(Error::Config("combination has no source sites".into()));
    }
    let sources: Vec<RecordingSet> = combo
        .sources
        .iter()
        .map(|id| find(id))
        .collect::<Result<_>>()?;
    let targets: Vec<RecordingSet> = if combo.targets.is_empty() {
        data.iter()
            .filter(|s| !combo.sources.iter().any(|id| id == s.domain_id()))
            .cloned()
            .collect()
    } else {
        combo
            .targets
            .iter()
            .map(|id| find(id))
            .collect::<Result<_>>()?
    };
    if targets.is_empty() {
        return Err(Error::Config(
            "combination leaves no target sites".into(),
        ));
    }
    for t in &targets {
        if combo.sources.iter().any(|id| id == t.domain_id()) {
            return Err(Error::Config(format!(
                "site {} appears in both sources and targets",
                t.domain_id()
            )));
        }
    }
    Ok((sources, targets))
}

/// Evaluates all methods on one split. The split's evaluation subset is
/// self-contained: per target site, both the adaptation statistics
/// (`Σ̄_T`, `ȳ_T`) and the scoring come from the same evaluation recordings.
fn evaluate_split(
    combination_id: &str,
    split_id: usize,
    eval: &[(usize, usize)],
    targets: &[RecordingSet],
    fitted: &[(Method, f64, Fitted)],
    optimizer: &OptimizerConfig,
) -> (Vec<MetricRecord>, Vec<CellFailure>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();

    // Per-site evaluation subsets with their mean outcome.
    let mut site_subsets: Vec<(RecordingSet, f64, Vec<f64>)> = Vec::new();
    for (t, site) in targets.iter().enumerate() {
        let indices: Vec<usize> = eval
            .iter()
            .filter(|(ti, _)| *ti == t)
            .map(|(_, i)| *i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        let subset = match site.subset(&indices) {
            Ok(s) => s,
            Err(e) => {
                failures.push(CellFailure {
                    combination_id: combination_id.into(),
                    split_id: Some(split_id),
                    method: "split".into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let ages: Vec<f64> = subset.recordings().iter().filter_map(|r| r.age).collect();
        if ages.len() != subset.len() {
            failures.push(CellFailure {
                combination_id: combination_id.into(),
                split_id: Some(split_id),
                method: "split".into(),
                message: format!(
                    "target site {} has unlabeled recordings in the evaluation set",
                    subset.domain_id()
                ),
            });
            continue;
        }
        let ybar = ages.iter().sum::<f64>() / ages.len() as f64;
        site_subsets.push((subset, ybar, ages));
    }
    if site_subsets.is_empty() {
        return (records, failures);
    }
    let y_true: Vec<f64> = site_subsets
        .iter()
        .flat_map(|(_, _, ages)| ages.iter().copied())
        .collect();

    for (method, _, model) in fitted {
        let predictions = (|| -> Result<Vec<f64>> {
            let mut preds = Vec::with_capacity(y_true.len());
            for (subset, ybar, _) in &site_subsets {
                preds.extend(predict_subset(model, subset, *ybar, optimizer)?);
            }
            Ok(preds)
        })();
        match predictions {
            Ok(preds) => {
                let r2 = r2_score(&y_true, &preds);
                let mae_v = mae(&y_true, &preds);
                let (spearman, spearman_degenerate) = match spearman_rho(&y_true, &preds) {
                    Ok(v) => (v, false),
                    Err(Error::UndefinedMetric(_)) => (0.0, true),
                    Err(e) => {
                        failures.push(CellFailure {
                            combination_id: combination_id.into(),
                            split_id: Some(split_id),
                            method: method.as_str().into(),
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                match (r2, mae_v) {
                    (Ok(r2), Ok(mae_v)) => records.push(MetricRecord {
                        combination_id: combination_id.into(),
                        split_id,
                        method: method.as_str().into(),
                        r2,
                        mae: mae_v,
                        spearman,
                        spearman_degenerate,
                    }),
                    (r2, mae_v) => {
                        let msg = [r2.err(), mae_v.err()]
                            .into_iter()
                            .flatten()
                            .map(|e| e.to_string())
                            .collect::<Vec<_>>()
                            .join("; ");
                        failures.push(CellFailure {
                            combination_id: combination_id.into(),
                            split_id: Some(split_id),
                            method: method.as_str().into(),
                            message: msg,
                        });
                    }
                }
            }
            Err(e) => failures.push(CellFailure {
                combination_id: combination_id.into(),
                split_id: Some(split_id),
                method: method.as_str().into(),
                message: e.to_string(),
            }),
        }
    }
    (records, failures)
}

fn predict_subset(
    fitted: &Fitted,
    subset: &RecordingSet,
    ybar: f64,
    optimizer: &OptimizerConfig,
) -> Result<Vec<f64>> {
    match fitted {
        Fitted::Dummy => Ok(do_dummy_predict(ybar, subset.len())),
        Fitted::Baseline(model) => match model.kind {
            BaselineKind::DoDummy => Ok(do_dummy_predict(ybar, subset.len())),
            BaselineKind::NoDa => no_da_predict(model, subset),
            BaselineKind::Recenter => recenter_predict(model, subset, &MeanConfig::default()),
            BaselineKind::DoIntercept => do_intercept_predict(model, subset, ybar),
        },
        Fitted::Gopsa(model) => {
            adapt_and_predict(subset, ybar, model, optimizer).map(|(_, preds)| preds)
        }
    }
}

fn paired_diffs(
    records: &[MetricRecord],
    combination_id: &str,
    method_a: &str,
    method_b: &str,
    metric: Metric,
) -> Vec<f64> {
    let mut by_split: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.combination_id == combination_id) {
        let entry = by_split.entry(rec.split_id).or_default();
        if rec.method == method_a {
            entry.0 = Some(rec.value(metric));
        } else if rec.method == method_b {
            entry.1 = Some(rec.value(metric));
        }
    }
    by_split
        .values()
        .filter_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        })
        .collect()
}

/// Per-site transport fractions and mean log-spectra on the full data.
/// The Riemannian mean of transported matrices equals the transported mean,
/// which at the site's own base collapses to `Σ̄^{1−α}`.
#[allow(clippy::too_many_arguments)]
fn inspect_combination(
    combination_id: &str,
    sources: &[RecordingSet],
    targets: &[RecordingSet],
    freqs: &[f64],
    fitted: &[(Method, f64, Fitted)],
    methods: &[Method],
    optimizer: &OptimizerConfig,
    alphas: &mut Vec<AlphaRecord>,
    psd: &mut Vec<PsdRecord>,
) -> Result<()> {
    let mean_cfg = MeanConfig::default();
    let gopsa = fitted.iter().find_map(|(_, _, f)| match f {
        Fitted::Gopsa(m) => Some(m.as_ref()),
        _ => None,
    });

    // Site means on the full data, shared by every method's spectra.
    let mut site_rows: Vec<(String, String, Option<f64>, Vec<crate::spd::SpdMatrix<f64>>)> =
        Vec::new();
    for set in sources {
        site_rows.push((
            set.domain_id().into(),
            "source".into(),
            set.mean_age(),
            per_frequency_means(set, &mean_cfg)
                .context(format!("site means for {}", set.domain_id()))?,
        ));
    }
    for set in targets {
        site_rows.push((
            set.domain_id().into(),
            "target".into(),
            set.mean_age(),
            per_frequency_means(set, &mean_cfg)
                .context(format!("site means for {}", set.domain_id()))?,
        ));
    }

    // Fitted transport fraction per site for the geodesic estimator: the
    // learned per-source values, and a full-data adaptation per target.
    let mut gopsa_alpha: BTreeMap<String, f64> = BTreeMap::new();
    if let Some(model) = gopsa {
        for (k, set) in sources.iter().enumerate() {
            gopsa_alpha.insert(set.domain_id().into(), sigmoid(model.gammas_source[k]));
        }
        for set in targets {
            if let Some(ybar) = set.mean_age() {
                let (adaptation, _) = adapt_and_predict(set, ybar, model, optimizer)
                    .context(format!("full-site adaptation for {}", set.domain_id()))?;
                gopsa_alpha.insert(set.domain_id().into(), sigmoid(adaptation.gamma_target));
            }
        }
        for (site, role, mean_age, _) in &site_rows {
            if let Some(&alpha) = gopsa_alpha.get(site) {
                alphas.push(AlphaRecord {
                    combination_id: combination_id.into(),
                    method: "gopsa".into(),
                    site: site.clone(),
                    role: role.clone(),
                    mean_age: *mean_age,
                    alpha,
                });
            }
        }
    }
    if methods.contains(&Method::Recenter) {
        for (site, role, mean_age, _) in &site_rows {
            alphas.push(AlphaRecord {
                combination_id: combination_id.into(),
                method: "recenter".into(),
                site: site.clone(),
                role: role.clone(),
                mean_age: *mean_age,
                alpha: 1.0,
            });
        }
    }

    for &method in methods {
        let method_alpha = |site: &str| -> Option<f64> {
            match method {
                Method::NoDa => Some(0.0),
                Method::Recenter => Some(1.0),
                Method::Gopsa => gopsa_alpha.get(site).copied(),
                _ => None,
            }
        };
        if !matches!(method, Method::NoDa | Method::Recenter | Method::Gopsa) {
            continue;
        }
        for (site, role, _, means) in &site_rows {
            let Some(alpha) = method_alpha(site) else {
                continue;
            };
            for (f, mean) in means.iter().enumerate() {
                let powered = mean.powf(1.0 - alpha)?;
                let d = powered.dim();
                let mean_log_power = (0..d)
                    .map(|c| powered[(c, c)].ln())
                    .sum::<f64>()
                    / d as f64;
                psd.push(PsdRecord {
                    combination_id: combination_id.into(),
                    method: method.as_str().into(),
                    site: site.clone(),
                    role: role.clone(),
                    freq_index: f,
                    freq: freqs.get(f).copied().unwrap_or(f as f64),
                    mean_log_power,
                });
            }
        }
    }
    Ok(())
}

/// Writes every report table: `results.csv`, `summary.json`,
/// `normalized.csv`, `ttests.csv`, `alphas.csv`, `psd.csv`.
pub fn emit_tables(report: &BenchmarkReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    crate::dataio::save_results(report, out_dir)?;

    let mut w = csv::Writer::from_path(out_dir.join("normalized.csv"))?;
    w.write_record([
        "combination_id",
        "split_id",
        "method",
        "metric",
        "value",
        "degenerate",
    ])?;
    for n in &report.normalized {
        w.write_record([
            n.combination_id.as_str(),
            &n.split_id.to_string(),
            n.method.as_str(),
            n.metric.as_str(),
            &format!("{}", n.value),
            &n.degenerate.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("ttests.csv"))?;
    w.write_record([
        "combination_id",
        "method_a",
        "method_b",
        "metric",
        "statistic",
        "p_value",
        "mean_diff",
        "n_splits",
        "test_fraction",
        "degenerate",
    ])?;
    for t in &report.ttests {
        w.write_record([
            t.combination_id.as_str(),
            t.method_a.as_str(),
            t.method_b.as_str(),
            t.metric.as_str(),
            &format!("{}", t.result.statistic),
            &format!("{}", t.result.p_value),
            &format!("{}", t.result.mean_diff),
            &t.result.n_splits.to_string(),
            &format!("{}", t.result.test_fraction),
            &t.result.degenerate.to_string(),
        ])?;
    }
    w.flush()?;

    write_alphas_csv(&report.alphas, &out_dir.join("alphas.csv"))?;
    write_psd_csv(&report.psd, &out_dir.join("psd.csv"))?;
    Ok(())
}

/// Writes the per-site transport-fraction table.
pub fn write_alphas_csv(alphas: &[AlphaRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["combination_id", "method", "site", "role", "mean_age", "alpha"])?;
    for a in alphas {
        w.write_record([
            a.combination_id.as_str(),
            a.method.as_str(),
            a.site.as_str(),
            a.role.as_str(),
            &a.mean_age.map(|v| format!("{v}")).unwrap_or_default(),
            &format!("{}", a.alpha),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-site mean log-spectrum table.
pub fn write_psd_csv(psd: &[PsdRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "combination_id",
        "method",
        "site",
        "role",
        "freq_index",
        "freq",
        "mean_log_power",
    ])?;
    for p in psd {
        w.write_record([
            p.combination_id.as_str(),
            p.method.as_str(),
            p.site.as_str(),
            p.role.as_str(),
            &p.freq_index.to_string(),
            &format!("{}", p.freq),
            &format!("{}", p.mean_log_power),
        ])?;
    }
    w.flush()?;
    Ok(())
}
