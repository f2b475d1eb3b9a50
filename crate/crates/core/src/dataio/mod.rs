//! Dataset containers, on-disk formats and the synthetic multi-domain
//! generator.
//!
//! A dataset is a directory with
//! * `manifest.json` — shapes, frequencies and per-domain file references,
//! * one `<domain>.bin` per domain — float64 little-endian matrices in
//!   `(recording, frequency, row, col)` order behind a 16-byte
//!   magic/version header,
//! * `metadata.csv` — `subject_id, domain, age` rows matching the binary
//!   payload order.

mod synth;
mod xspec;

pub use synth::{generate_synthetic, SynthConfig};
pub use xspec::{
    load_cross_spectral_dataset, save_cross_spectral_dataset, CrossSpectralDomain,
    CrossSpectralRecording, XSPEC_FILE_MAGIC, XSPEC_FILE_VERSION,
};

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// Magic bytes opening every domain payload file.
pub const DOMAIN_FILE_MAGIC: [u8; 8] = *b"SPDTNSR\0";
/// Current payload format version.
pub const DOMAIN_FILE_VERSION: u32 = 1;
/// Manifest schema version.
pub const MANIFEST_VERSION: u32 = 1;

/// One EEG recording: `F` per-frequency SPD matrices plus an optional
/// outcome (age in years; absent for unlabeled targets).
#[derive(Debug, Clone)]
pub struct Recording {
    pub subject_id: String,
    pub slices: Vec<SpdMatrix<f64>>,
    pub age: Option<f64>,
}

/// One domain (recording site): a uniform collection of recordings.
#[derive(Debug, Clone)]
pub struct RecordingSet {
    domain_id: String,
    recordings: Vec<Recording>,
    dim: usize,
    n_freqs: usize,
}

impl RecordingSet {
    pub fn new(domain_id: impl Into<String>, recordings: Vec<Recording>) -> Result<Self> {
        let domain_id = domain_id.into();
        let first = recordings.first().ok_or_else(|| {
            Error::invalid_input(format!("domain {domain_id} has no recordings"))
        })?;
        let n_freqs = first.slices.len();
        if n_freqs == 0 {
            return Err(Error::invalid_input(format!(
                "domain {domain_id}: recordings must hold at least one frequency slice"
            )));
        }
        let dim = first.slices[0].dim();
        for rec in &recordings {
            if rec.slices.len() != n_freqs {
                return Err(Error::ShapeMismatch(format!(
                    "domain {domain_id}, subject {}: expected {n_freqs} slices, got {}",
                    rec.subject_id,
                    rec.slices.len()
                )));
            }
            if let Some(bad) = rec.slices.iter().find(|s| s.dim() != dim) {
                return Err(Error::ShapeMismatch(format!(
                    "domain {domain_id}, subject {}: slice dimension {} != {dim}",
                    rec.subject_id,
                    bad.dim()
                )));
            }
            if let Some(age) = rec.age {
                if !age.is_finite() {
                    return Err(Error::invalid_input(format!(
                        "domain {domain_id}, subject {}: non-finite age",
                        rec.subject_id
                    )));
                }
            }
        }
        Ok(RecordingSet {
            domain_id,
            recordings,
            dim,
            n_freqs,
        })
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_freqs(&self) -> usize {
        self.n_freqs
    }

    /// Mean outcome over labeled recordings; `None` when no labels exist.
    pub fn mean_age(&self) -> Option<f64> {
        let ages: Vec<f64> = self.recordings.iter().filter_map(|r| r.age).collect();
        if ages.is_empty() {
            None
        } else {
            Some(ages.iter().sum::<f64>() / ages.len() as f64)
        }
    }

    /// Ages of all labeled recordings, in recording order.
    pub fn ages(&self) -> Vec<Option<f64>> {
        self.recordings.iter().map(|r| r.age).collect()
    }

    /// Sub-collection restricted to the given recording indices (order kept).
    pub fn subset(&self, indices: &[usize]) -> Result<RecordingSet> {
        let recordings = indices
            .iter()
            .map(|&i| {
                self.recordings.get(i).cloned().ok_or_else(|| {
                    Error::invalid_input(format!(
                        "recording index {i} out of range for domain {}",
                        self.domain_id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        RecordingSet::new(self.domain_id.clone(), recordings)
    }
}

/// Manifest describing an on-disk dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub d: usize,
    pub n_freqs: usize,
    pub freqs: Vec<f64>,
    pub domains: Vec<DomainEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainEntry {
    pub id: String,
    pub n_recordings: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_age: Option<f64>,
    pub file: String,
}

/// Loading knobs. `shrink` applies trace-scaled Tikhonov regularization to
/// every slice before SPD validation, for payloads that are only positive
/// semi-definite.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub shrink: Option<f64>,
}

/// Writes a dataset directory (manifest, binary payloads, metadata CSV).
pub fn save_dataset(sets: &[RecordingSet], freqs: &[f64], dir: &Path) -> Result<()> {
    let first = sets
        .first()
        .ok_or_else(|| Error::invalid_input("cannot save an empty dataset"))?;
    let (d, n_freqs) = (first.dim(), first.n_freqs());
    if freqs.len() != n_freqs {
        return Err(Error::ShapeMismatch(format!(
            "{} frequencies for {n_freqs} slices",
            freqs.len()
        )));
    }
    fs::create_dir_all(dir)?;

    let mut sorted: Vec<&RecordingSet> = sets.iter().collect();
    sorted.sort_by(|a, b| a.domain_id().cmp(b.domain_id()));

    let mut domains = Vec::new();
    let mut meta = csv::Writer::from_path(dir.join("metadata.csv"))?;
    meta.write_record(["subject_id", "domain", "age"])?;
    for set in &sorted {
        if set.dim() != d || set.n_freqs() != n_freqs {
            return Err(Error::ShapeMismatch(format!(
                "domain {} has shape ({}, {}), expected ({d}, {n_freqs})",
                set.domain_id(),
                set.dim(),
                set.n_freqs()
            )));
        }
        let file = format!("{}.bin", set.domain_id());
        write_domain_payload(set, &dir.join(&file))?;
        for rec in set.recordings() {
            meta.write_record([
                rec.subject_id.as_str(),
                set.domain_id(),
                &rec.age.map(|a| format!("{a}")).unwrap_or_default(),
            ])?;
        }
        domains.push(DomainEntry {
            id: set.domain_id().to_string(),
            n_recordings: set.len(),
            mean_age: set.mean_age(),
            file,
        });
    }
    meta.flush()?;

    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        d,
        n_freqs,
        freqs: freqs.to_vec(),
        domains,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Loads a dataset directory with default options.
pub fn load_dataset(dir: &Path) -> Result<(Vec<RecordingSet>, Vec<f64>)> {
    load_dataset_with(dir, &LoadOptions::default())
}

/// Loads, validates and deterministically orders a dataset directory.
pub fn load_dataset_with(dir: &Path, opts: &LoadOptions) -> Result<(Vec<RecordingSet>, Vec<f64>)> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path));
    }
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::Config(format!(
            "unsupported manifest version {}",
            manifest.format_version
        )));
    }
    if manifest.freqs.len() != manifest.n_freqs {
        return Err(Error::ShapeMismatch(format!(
            "manifest declares {} frequencies but lists {}",
            manifest.n_freqs,
            manifest.freqs.len()
        )));
    }

    let metadata = read_metadata(&dir.join("metadata.csv"))?;

    let mut sets = Vec::new();
    for entry in &manifest.domains {
        let path = dir.join(&entry.file);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let slices = read_domain_payload(&path, manifest.d, manifest.n_freqs, entry.n_recordings)?;
        let domain_meta: Vec<&MetaRow> = metadata
            .iter()
            .filter(|row| row.domain == entry.id)
            .collect();
        if domain_meta.len() != entry.n_recordings {
            return Err(Error::ShapeMismatch(format!(
                "domain {}: {} metadata rows for {} recordings in {}",
                entry.id,
                domain_meta.len(),
                entry.n_recordings,
                entry.file
            )));
        }
        let mut recordings = Vec::with_capacity(entry.n_recordings);
        for (i, (raw, row)) in slices.into_iter().zip(domain_meta).enumerate() {
            let slices = raw
                .into_iter()
                .enumerate()
                .map(|(f, m)| {
                    let validated = match opts.shrink {
                        Some(rho) => crate::spd::SymMatrix::new(m)?.shrink(rho),
                        None => SpdMatrix::new(m),
                    };
                    validated.map_err(|e| {
                        e.with_context(format!(
                            "domain {}, recording {i}, frequency {f} in {}",
                            entry.id, entry.file
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            recordings.push(Recording {
                subject_id: row.subject_id.clone(),
                slices,
                age: row.age,
            });
        }
        recordings.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        sets.push(RecordingSet::new(entry.id.clone(), recordings)?);
    }
    sets.sort_by(|a, b| a.domain_id().cmp(b.domain_id()));
    Ok((sets, manifest.freqs))
}

pub(crate) struct MetaRow {
    pub(crate) subject_id: String,
    pub(crate) domain: String,
    pub(crate) age: Option<f64>,
}

pub(crate) fn read_metadata(path: &Path) -> Result<Vec<MetaRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let age_field = record.get(2).unwrap_or("").trim();
        let age = if age_field.is_empty() {
            None
        } else {
            Some(age_field.parse::<f64>().map_err(|e| {
                Error::invalid_input(format!("bad age value {age_field:?}: {e}"))
            })?)
        };
        rows.push(MetaRow {
            subject_id: record.get(0).unwrap_or("").to_string(),
            domain: record.get(1).unwrap_or("").to_string(),
            age,
        });
    }
    Ok(rows)
}

fn write_domain_payload(set: &RecordingSet, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&DOMAIN_FILE_MAGIC)?;
    file.write_all(&DOMAIN_FILE_VERSION.to_le_bytes())?;
    file.write_all(&0u32.to_le_bytes())?;
    let d = set.dim();
    let mut buf = Vec::with_capacity(set.len() * set.n_freqs() * d * d * 8);
    for rec in set.recordings() {
        for slice in &rec.slices {
            let m = slice.as_matrix();
            for i in 0..d {
                for j in 0..d {
                    buf.extend_from_slice(&m[(i, j)].to_le_bytes());
                }
            }
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

fn read_domain_payload(
    path: &Path,
    d: usize,
    n_freqs: usize,
    n_recordings: usize,
) -> Result<Vec<Vec<nalgebra::DMatrix<f64>>>> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)?;
    if header[..8] != DOMAIN_FILE_MAGIC {
        return Err(Error::ShapeMismatch(format!(
            "{}: bad magic bytes",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != DOMAIN_FILE_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported payload version {version}",
            path.display()
        )));
    }
    let expected = n_recordings * n_freqs * d * d * 8;
    let mut body = Vec::with_capacity(expected);
    file.read_to_end(&mut body)?;
    if body.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{}: payload holds {} bytes, manifest implies {expected}",
            path.display(),
            body.len()
        )));
    }
    let mut out = Vec::with_capacity(n_recordings);
    let mut offset = 0;
    for _ in 0..n_recordings {
        let mut per_freq = Vec::with_capacity(n_freqs);
        for _ in 0..n_freqs {
            let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let bytes: [u8; 8] = body[offset..offset + 8].try_into().unwrap();
                    m[(i, j)] = f64::from_le_bytes(bytes);
                    offset += 8;
                }
            }
            per_freq.push(m);
        }
        out.push(per_freq);
    }
    Ok(out)
}

/// Writes the per-split metric records and a Table-1-style summary
/// (mean ± std across splits per combination, method and metric).
pub fn save_results(report: &crate::benchmark::BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(report, &dir.join("results.csv"))?;
    write_summary_json(report, &dir.join("summary.json"))?;
    Ok(())
}

pub(crate) fn write_results_csv(
    report: &crate::benchmark::BenchmarkReport,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["combination_id", "split_id", "method", "metric", "value"])?;
    for rec in &report.records {
        for (metric, value) in rec.metric_values() {
            w.write_record([
                rec.combination_id.as_str(),
                &rec.split_id.to_string(),
                rec.method.as_str(),
                metric.as_str(),
                &format!("{value}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_summary_json(
    report: &crate::benchmark::BenchmarkReport,
    path: &Path,
) -> Result<()> {
    let summary = report.summary();
    fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
