//! Model persistence: a versioned, self-describing JSON envelope shared by
//! the geodesic estimator and the baselines. Float payloads survive the
//! round trip bit-exactly (shortest-representation encoding).

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineModel};
use crate::error::{Error, Result};
use crate::features::DomainMeans;
use crate::gopsa::GopsaModel;
use crate::regression::RidgeModel;
use crate::spd::SpdMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Tag describing the feature vectorization so serialized coefficients are
/// only applied against the ordering they were trained with.
pub const UVECT_ORDER_TAG: &str = "upper-triangle-row-major-sqrt2-offdiag";

/// Serialized model envelope. Optional fields follow the kind: the dummy
/// carries nothing beyond the tag, pooled-mean baselines carry one mean row,
/// the geodesic estimator carries one γ and one mean row per source domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub kind: String,
    pub d: usize,
    pub n_freqs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_intercept: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    pub mean_domain_ids: Vec<String>,
    /// Row-major d×d float64 payload per (domain, frequency).
    pub mean_matrices: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_means_y: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_loss_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub uvect_order: String,
}

impl ModelDocument {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let doc: ModelDocument = serde_json::from_str(&fs::read_to_string(path)?)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        if doc.uvect_order != UVECT_ORDER_TAG {
            return Err(Error::Config(format!(
                "unknown vectorization ordering {:?}",
                doc.uvect_order
            )));
        }
        Ok(doc)
    }
}

fn means_to_payload(means: &DomainMeans<f64>) -> (Vec<String>, Vec<Vec<Vec<f64>>>) {
    let ids = means.domain_ids().to_vec();
    let d = means.dim();
    let grid = (0..means.n_domains())
        .map(|k| {
            (0..means.n_freqs())
                .map(|f| {
                    let m = means.get(k, f).as_matrix();
                    let mut row_major = Vec::with_capacity(d * d);
                    for i in 0..d {
                        for j in 0..d {
                            row_major.push(m[(i, j)]);
                        }
                    }
                    row_major
                })
                .collect()
        })
        .collect();
    (ids, grid)
}

fn means_from_payload(
    ids: Vec<String>,
    grid: &[Vec<Vec<f64>>],
    d: usize,
) -> Result<DomainMeans<f64>> {
    let matrices = grid
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(f, data)| {
                    if data.len() != d * d {
                        return Err(Error::ShapeMismatch(format!(
                            "mean payload ({k}, {f}) holds {} values, expected {}",
                            data.len(),
                            d * d
                        )));
                    }
                    SpdMatrix::new(DMatrix::from_row_slice(d, d, data))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    DomainMeans::new(ids, matrices)
}

impl GopsaModel {
    pub fn to_document(&self) -> ModelDocument {
        let (mean_domain_ids, mean_matrices) = means_to_payload(&self.means);
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            kind: "gopsa".into(),
            d: self.dim(),
            n_freqs: self.n_freqs(),
            lambda: Some(self.lambda),
            fit_intercept: Some(self.fit_intercept),
            gammas: Some(self.gammas_source.clone()),
            coefficients: Some(self.ridge.coefficients.iter().copied().collect()),
            intercept: Some(self.ridge.intercept),
            mean_domain_ids,
            mean_matrices,
            domain_means_y: None,
            train_loss_trace: Some(self.train_loss_trace.clone()),
            converged: Some(self.converged),
            uvect_order: UVECT_ORDER_TAG.into(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.kind != "gopsa" {
            return Err(Error::Config(format!(
                "expected a gopsa model document, found kind {:?}",
                doc.kind
            )));
        }
        let means = means_from_payload(doc.mean_domain_ids.clone(), &doc.mean_matrices, doc.d)?;
        let missing = |what: &str| Error::Config(format!("model document is missing {what}"));
        let gammas = doc.gammas.clone().ok_or_else(|| missing("gammas"))?;
        let coefficients = doc
            .coefficients
            .clone()
            .ok_or_else(|| missing("coefficients"))?;
        let lambda = doc.lambda.ok_or_else(|| missing("lambda"))?;
        if gammas.len() != means.n_domains() {
            return Err(Error::ShapeMismatch(format!(
                "{} gammas for {} mean rows",
                gammas.len(),
                means.n_domains()
            )));
        }
        Ok(GopsaModel {
            gammas_source: gammas,
            ridge: RidgeModel {
                coefficients: DVector::from_vec(coefficients),
                intercept: doc.intercept.unwrap_or(0.0),
                lambda,
            },
            means,
            lambda,
            train_loss_trace: doc.train_loss_trace.clone().unwrap_or_default(),
            converged: doc.converged.unwrap_or(true),
            fit_intercept: doc.fit_intercept.unwrap_or(true),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_document().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_document(&ModelDocument::load(path)?)
    }
}

fn baseline_kind_from_tag(tag: &str) -> Result<BaselineKind> {
    Ok(match tag {
        "dummy" => BaselineKind::DoDummy,
        "noda" => BaselineKind::NoDa,
        "recenter" => BaselineKind::Recenter,
        "dointercept" => BaselineKind::DoIntercept,
        other => {
            return Err(Error::Config(format!("unknown model kind {other:?}")));
        }
    })
}

impl BaselineModel {
    pub fn to_document(&self) -> ModelDocument {
        let (mean_domain_ids, mean_matrices) = self
            .source_mean_grid
            .as_ref()
            .map(means_to_payload)
            .unwrap_or_default();
        let (d, n_freqs) = self
            .source_mean_grid
            .as_ref()
            .map(|g| (g.dim(), g.n_freqs()))
            .unwrap_or((0, 0));
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            kind: self.kind.as_str().into(),
            d,
            n_freqs,
            lambda: self.ridge.as_ref().map(|r| r.lambda),
            fit_intercept: None,
            gammas: None,
            coefficients: self
                .ridge
                .as_ref()
                .map(|r| r.coefficients.iter().copied().collect()),
            intercept: self.ridge.as_ref().map(|r| r.intercept),
            mean_domain_ids,
            mean_matrices,
            domain_means_y: self.source_domain_means_y.clone(),
            train_loss_trace: None,
            converged: None,
            uvect_order: UVECT_ORDER_TAG.into(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let kind = baseline_kind_from_tag(&doc.kind)?;
        let source_mean_grid = if doc.mean_matrices.is_empty() {
            None
        } else {
            Some(means_from_payload(
                doc.mean_domain_ids.clone(),
                &doc.mean_matrices,
                doc.d,
            )?)
        };
        let ridge = match (&doc.coefficients, doc.lambda) {
            (Some(c), Some(lambda)) => Some(RidgeModel {
                coefficients: DVector::from_vec(c.clone()),
                intercept: doc.intercept.unwrap_or(0.0),
                lambda,
            }),
            _ => None,
        };
        Ok(BaselineModel {
            kind,
            ridge,
            source_mean_grid,
            source_domain_means_y: doc.domain_means_y.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_document().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_document(&ModelDocument::load(path)?)
    }
}
