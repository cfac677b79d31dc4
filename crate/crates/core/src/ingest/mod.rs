//! Audio decoding, canonicalization and corpus manifests.

mod resample;

pub use resample::resample;

use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::{CANONICAL_RATE, MAX_DURATION_S};

/// A normalized mono sample buffer.
///
/// After [`canonicalize`] all samples are finite, clamped to `[-1, 1]`, the
/// rate is 48 kHz and the duration is at most five minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        AudioClip {
            samples,
            sample_rate,
            source_id: source_id.into(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One manifest row binding a file to its species label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub species: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("unreadable file {path}: {detail}")]
    UnreadableFile { path: String, detail: String },
    #[error("unsupported encoding in {path}: {detail}")]
    UnsupportedEncoding { path: String, detail: String },
    #[error("clip has no samples")]
    EmptyClip,
    #[error("manifest is missing required column `{0}`")]
    MissingColumn(String),
    #[error("manifest lists path `{0}` more than once")]
    DuplicatePath(String),
    #[error("manifest row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Decode a PCM waveform file to a mono clip at its native rate.
///
/// Multi-channel content is collapsed by arithmetic channel mean. Integer
/// PCM is scaled by `1 / 2^(bits-1)`; no gain normalization is applied.
pub fn decode(path: &Path) -> Result<AudioClip, IngestError> {
    let display = path.display().to_string();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => IngestError::Io {
            path: display.clone(),
            source: io,
        },
        other => IngestError::UnreadableFile {
            path: display.clone(),
            detail: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(IngestError::UnreadableFile {
            path: display,
            detail: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(|e| IngestError::UnreadableFile {
                path: display.clone(),
                detail: e.to_string(),
            })?,
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| IngestError::UnreadableFile {
                    path: display.clone(),
                    detail: e.to_string(),
                })?
        }
        (fmt, bits) => {
            return Err(IngestError::UnsupportedEncoding {
                path: display,
                detail: format!("{fmt:?} {bits}-bit"),
            })
        }
    };

    let frames = interleaved.len() / channels;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let sum: f64 = interleaved[f * channels..(f + 1) * channels].iter().sum();
        samples.push((sum / channels as f64) as f32);
    }
    Ok(AudioClip::new(samples, spec.sample_rate, display))
}

/// Write a clip as a 32-bit float WAV file. Round-trips reading bit-exactly.
pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<(), IngestError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let display = path.display().to_string();
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| IngestError::Io {
        path: display.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    for &s in &clip.samples {
        writer.write_sample(s).map_err(|e| IngestError::Io {
            path: display.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    }
    writer.finalize().map_err(|e| IngestError::Io {
        path: display,
        source: std::io::Error::other(e.to_string()),
    })
}

/// Canonicalize a clip: resample to 48 kHz, truncate to the first five
/// minutes, clamp amplitudes to `[-1, 1]`.
///
/// Resampling happens before truncation, so the cap is applied at the
/// canonical rate. Idempotent: a canonical clip passes through bit-exactly.
pub fn canonicalize(clip: &AudioClip) -> Result<AudioClip, IngestError> {
    if clip.samples.is_empty() {
        return Err(IngestError::EmptyClip);
    }
    let mut samples = if clip.sample_rate == CANONICAL_RATE {
        clip.samples.clone()
    } else {
        resample(&clip.samples, clip.sample_rate, CANONICAL_RATE)
    };
    let max_len = (MAX_DURATION_S * CANONICAL_RATE as f64) as usize;
    samples.truncate(max_len);
    for s in &mut samples {
        if !s.is_finite() {
            *s = 0.0;
        } else {
            *s = s.clamp(-1.0, 1.0);
        }
    }
    Ok(AudioClip::new(
        samples,
        CANONICAL_RATE,
        clip.source_id.clone(),
    ))
}

/// Parse a manifest: delimiter-separated text with a header row naming at
/// least `path` and `species`. Comma is the default delimiter; tab is
/// accepted. Relative paths are resolved against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, IngestError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut reader = std::io::BufReader::new(file);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| IngestError::Io {
            path: display.clone(),
            source: e,
        })?;
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };

    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(file);
    let headers = csv
        .headers()
        .map_err(|e| IngestError::BadRow {
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let path_col = col("path").ok_or_else(|| IngestError::MissingColumn("path".into()))?;
    let species_col = col("species").ok_or_else(|| IngestError::MissingColumn("species".into()))?;

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| IngestError::BadRow {
            row: i + 1,
            detail: e.to_string(),
        })?;
        let raw_path = record.get(path_col).unwrap_or("").trim();
        let species = record.get(species_col).unwrap_or("").trim();
        if raw_path.is_empty() {
            return Err(IngestError::BadRow {
                row: i + 1,
                detail: "empty path".into(),
            });
        }
        if species.is_empty() {
            return Err(IngestError::BadRow {
                row: i + 1,
                detail: "empty species label".into(),
            });
        }
        if !seen.insert(raw_path.to_string()) {
            return Err(IngestError::DuplicatePath(raw_path.to_string()));
        }
        let p = Path::new(raw_path);
        let resolved = if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        };
        entries.push(ManifestEntry {
            path: resolved,
            species: species.to_string(),
        });
    }
    Ok(entries)
}
