//! Cross-spectral tensor datasets: the input format of the preprocessing
//! chain. Same directory layout as the SPD dataset (manifest, per-domain
//! payloads, metadata CSV), but payloads hold complex Hermitian slices as
//! interleaved `(re, im)` float64 pairs.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Complex, DMatrix};

use super::{read_metadata, DatasetManifest, DomainEntry, MANIFEST_VERSION};
use crate::error::{Error, Result, ResultExt};
use crate::preprocess::CrossSpectralTensor;

/// Magic bytes for complex cross-spectral payloads.
pub const XSPEC_FILE_MAGIC: [u8; 8] = *b"XSPTNSR\0";
pub const XSPEC_FILE_VERSION: u32 = 1;

/// One recording awaiting preprocessing.
#[derive(Debug, Clone)]
pub struct CrossSpectralRecording {
    pub subject_id: String,
    pub tensor: CrossSpectralTensor,
    pub age: Option<f64>,
}

/// One domain of cross-spectral recordings.
#[derive(Debug, Clone)]
pub struct CrossSpectralDomain {
    pub domain_id: String,
    pub recordings: Vec<CrossSpectralRecording>,
}

/// Writes a cross-spectral dataset directory. This is also the target format
/// for external converters of published cross-spectral archives: emit one
/// Hermitian d×d complex slice per frequency per recording, interleaved
/// `(re, im)` float64 little-endian in `(recording, frequency, row, col)`
/// order.
pub fn save_cross_spectral_dataset(domains: &[CrossSpectralDomain], dir: &Path) -> Result<()> {
    let first_tensor = domains
        .first()
        .and_then(|d| d.recordings.first())
        .map(|r| &r.tensor)
        .ok_or_else(|| Error::invalid_input("cannot save an empty cross-spectral dataset"))?;
    let d = first_tensor.dim();
    let freqs = first_tensor.freqs().to_vec();
    fs::create_dir_all(dir)?;

    let mut entries = Vec::new();
    let mut meta = csv::Writer::from_path(dir.join("metadata.csv"))?;
    meta.write_record(["subject_id", "domain", "age"])?;
    for domain in domains {
        let file = format!("{}.bin", domain.domain_id);
        let mut out = fs::File::create(dir.join(&file))?;
        out.write_all(&XSPEC_FILE_MAGIC)?;
        out.write_all(&XSPEC_FILE_VERSION.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        for rec in &domain.recordings {
            if rec.tensor.dim() != d || rec.tensor.freqs() != freqs.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "recording {} does not match the dataset shape",
                    rec.subject_id
                )));
            }
            let mut buf = Vec::with_capacity(freqs.len() * d * d * 16);
            for slice in rec.tensor.slices() {
                for i in 0..d {
                    for j in 0..d {
                        buf.extend_from_slice(&slice[(i, j)].re.to_le_bytes());
                        buf.extend_from_slice(&slice[(i, j)].im.to_le_bytes());
                    }
                }
            }
            out.write_all(&buf)?;
            meta.write_record([
                rec.subject_id.as_str(),
                domain.domain_id.as_str(),
                &rec.age.map(|a| format!("{a}")).unwrap_or_default(),
            ])?;
        }
        entries.push(DomainEntry {
            id: domain.domain_id.clone(),
            n_recordings: domain.recordings.len(),
            mean_age: None,
            file,
        });
    }
    meta.flush()?;

    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        d,
        n_freqs: freqs.len(),
        freqs,
        domains: entries,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Loads a cross-spectral dataset directory.
pub fn load_cross_spectral_dataset(dir: &Path) -> Result<Vec<CrossSpectralDomain>> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path));
    }
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let metadata = read_metadata(&dir.join("metadata.csv"))?;
    let d = manifest.d;

    let mut out = Vec::new();
    for entry in &manifest.domains {
        let path = dir.join(&entry.file);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let mut file = fs::File::open(&path)?;
        let mut header = [0u8; 16];
        file.read_exact(&mut header)?;
        if header[..8] != XSPEC_FILE_MAGIC {
            return Err(Error::ShapeMismatch(format!(
                "{}: bad magic bytes for a cross-spectral payload",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != XSPEC_FILE_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported payload version {version}",
                path.display()
            )));
        }
        let expected = entry.n_recordings * manifest.n_freqs * d * d * 16;
        let mut body = Vec::with_capacity(expected);
        file.read_to_end(&mut body)?;
        if body.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{}: payload holds {} bytes, manifest implies {expected}",
                path.display(),
                body.len()
            )));
        }
        let domain_meta: Vec<_> = metadata
            .iter()
            .filter(|row| row.domain == entry.id)
            .collect();
        if domain_meta.len() != entry.n_recordings {
            return Err(Error::ShapeMismatch(format!(
                "domain {}: {} metadata rows for {} recordings",
                entry.id,
                domain_meta.len(),
                entry.n_recordings
            )));
        }
        let mut offset = 0;
        let mut read_complex = |body: &[u8]| -> Complex<f64> {
            let re = f64::from_le_bytes(body[offset..offset + 8].try_into().unwrap());
            let im = f64::from_le_bytes(body[offset + 8..offset + 16].try_into().unwrap());
            offset += 16;
            Complex::new(re, im)
        };
        let mut recordings = Vec::with_capacity(entry.n_recordings);
        for (r, row) in domain_meta.iter().enumerate() {
            let mut slices = Vec::with_capacity(manifest.n_freqs);
            for _ in 0..manifest.n_freqs {
                let mut m = DMatrix::from_element(d, d, Complex::new(0.0, 0.0));
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = read_complex(&body);
                    }
                }
                slices.push(m);
            }
            let tensor = CrossSpectralTensor::new(manifest.freqs.clone(), slices)
                .context(format!("domain {}, recording {r}", entry.id))?;
            recordings.push(CrossSpectralRecording {
                subject_id: row.subject_id.clone(),
                tensor,
                age: row.age,
            });
        }
        out.push(CrossSpectralDomain {
            domain_id: entry.id.clone(),
            recordings,
        });
    }
    out.sort_by(|a, b| a.domain_id.cmp(&b.domain_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_xspec() -> Vec<CrossSpectralDomain> {
        let slice = |a: f64, im: f64| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex::new(a, 0.0),
                    Complex::new(0.3, im),
                    Complex::new(0.3, -im),
                    Complex::new(1.0, 0.0),
                ],
            )
        };
        vec![CrossSpectralDomain {
            domain_id: "lab".into(),
            recordings: vec![CrossSpectralRecording {
                subject_id: "lab-000".into(),
                tensor: CrossSpectralTensor::new(
                    vec![1.17, 1.56],
                    vec![slice(2.0, 0.4), slice(3.0, -0.2)],
                )
                .unwrap(),
                age: Some(25.0),
            }],
        }]
    }

    #[test]
    fn round_trip_preserves_complex_payload() {
        let domains = tiny_xspec();
        let dir = tempfile::tempdir().unwrap();
        save_cross_spectral_dataset(&domains, dir.path()).unwrap();
        let back = load_cross_spectral_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        let (orig, loaded) = (&domains[0].recordings[0], &back[0].recordings[0]);
        assert_eq!(orig.subject_id, loaded.subject_id);
        assert_eq!(orig.age, loaded.age);
        for (a, b) in orig.tensor.slices().iter().zip(loaded.tensor.slices()) {
            assert_eq!(a, b, "complex payload must be bit-exact");
        }
    }

    #[test]
    fn spd_payload_magic_is_rejected() {
        let domains = tiny_xspec();
        let dir = tempfile::tempdir().unwrap();
        save_cross_spectral_dataset(&domains, dir.path()).unwrap();
        // Corrupt the magic.
        let path = dir.path().join("lab.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes[..8].copy_from_slice(b"SPDTNSR\0");
        fs::write(&path, bytes).unwrap();
        assert!(load_cross_spectral_dataset(dir.path()).is_err());
    }
}
