//! Degradation study: corrupt audio with additive white noise or an
//! external codec round-trip, re-extract features, and report the per-
//! feature Pearson correlation between clean and degraded values.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::extract::{extract, ChirpGrid, Method};
use crate::features::{feature_names, summarize, FeatureVector};
use crate::ingest::{canonicalize, write_wav, AudioClip};
use crate::parallel::ordered_map;
use crate::spectral::AnalysisConfig;
use crate::synth::gaussian;

#[derive(Debug, thiserror::Error)]
pub enum RobustnessError {
    #[error("codec command unavailable: {0}")]
    CodecUnavailable(String),
    #[error("codec command failed with status {status}: {command}")]
    CodecFailed { command: String, status: i32 },
    #[error("need at least 3 complete pairs, found {0}")]
    InsufficientPairs(usize),
    #[error("zero variance in {0} values")]
    ZeroVariance(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}

/// A degradation applied to each clip before re-extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum Degradation {
    /// Additive white Gaussian noise at an absolute RMS level in dBFS
    /// (full scale = amplitude 1.0).
    WhiteNoise { level_dbfs: f64 },
    /// External encode/decode round-trip; the command template runs with
    /// `{in}` and `{out}` replaced by WAV paths.
    ExternalCodec { command: String },
}

impl Degradation {
    pub fn name(&self) -> &'static str {
        match self {
            Degradation::WhiteNoise { .. } => "white_noise",
            Degradation::ExternalCodec { .. } => "external_codec",
        }
    }
}

/// Default 64 kbps MP3 round-trip via the lame encoder.
pub fn default_codec_command() -> String {
    "lame --quiet -b 64 {in} - | lame --quiet --decode - {out}".to_string()
}

/// Add seeded white Gaussian noise with RMS `10^(level/20)` relative to
/// full scale (1.0), clipping the result back into `[-1, 1]`.
pub fn add_white_noise(clip: &AudioClip, level_dbfs: f64, seed: u64) -> AudioClip {
    assert!(level_dbfs <= 0.0, "noise level must be <= 0 dBFS");
    let sigma = 10f64.powf(level_dbfs / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = clip
        .samples
        .iter()
        .map(|&s| ((s as f64 + sigma * gaussian(&mut rng)).clamp(-1.0, 1.0)) as f32)
        .collect();
    AudioClip::new(samples, clip.sample_rate, clip.source_id.clone())
}

/// Run the external codec round-trip on a clip.
///
/// The clip is written as float WAV, the command template is executed with
/// `{in}`/`{out}` substituted, and the result is re-ingested and
/// re-canonicalized. Length differences from codec padding are trimmed or
/// zero-padded back to the original sample count.
pub fn degrade_codec(
    clip: &AudioClip,
    command: &str,
    workdir: &Path,
) -> Result<AudioClip, RobustnessError> {
    let in_path = workdir.join("codec_in.wav");
    let out_path = workdir.join("codec_out.wav");
    write_wav(clip, &in_path)?;
    let _ = std::fs::remove_file(&out_path);
    let rendered = command
        .replace("{in}", &in_path.display().to_string())
        .replace("{out}", &out_path.display().to_string());

    let needs_shell = rendered.contains(['|', '>', '<', ';', '&']);
    let status = if needs_shell {
        // pipefail so a missing encoder in a pipeline surfaces as 127.
        std::process::Command::new("bash")
            .args(["-o", "pipefail", "-c", &rendered])
            .status()
            .or_else(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    std::process::Command::new("sh").args(["-c", &rendered]).status()
                } else {
                    Err(e)
                }
            })
    } else {
        let parts: Vec<&str> = rendered.split_whitespace().collect();
        let (prog, args) = parts
            .split_first()
            .ok_or_else(|| RobustnessError::CodecUnavailable("empty command".into()))?;
        std::process::Command::new(prog).args(args).status()
    };
    let status = match status {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(RobustnessError::CodecUnavailable(rendered));
        }
        Err(e) => {
            return Err(RobustnessError::Io {
                path: rendered,
                source: e,
            })
        }
    };
    let code = status.code().unwrap_or(-1);
    // A shell reports a missing inner binary as exit 127.
    if code == 127 {
        return Err(RobustnessError::CodecUnavailable(rendered));
    }
    if code != 0 {
        return Err(RobustnessError::CodecFailed {
            command: rendered,
            status: code,
        });
    }
    if !out_path.exists() {
        return Err(RobustnessError::CodecFailed {
            command: rendered,
            status: 0,
        });
    }
    let decoded = crate::ingest::decode(&out_path)?;
    let mut canonical = canonicalize(&decoded)?;
    canonical.samples.resize(clip.samples.len(), 0.0);
    canonical.source_id = clip.source_id.clone();
    Ok(canonical)
}

/// Sample Pearson correlation and its square.
///
/// Pairs with any missing member are dropped by the caller; this function
/// requires equal-length complete inputs. When the two inputs are
/// element-wise identical the returned r-squared is exactly 1.0.
pub fn pearson_r2(x: &[f64], y: &[f64]) -> Result<(f64, f64), RobustnessError> {
    assert_eq!(x.len(), y.len());
    if x.len() < 3 {
        return Err(RobustnessError::InsufficientPairs(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(RobustnessError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(RobustnessError::ZeroVariance("y"));
    }
    // Identical inputs make sxy, sxx and syy the same accumulated value, so
    // the ratio below is exactly 1.
    let r2 = (sxy * sxy) / (sxx * syy);
    let r = sxy / (sxx * syy).sqrt();
    Ok((r.clamp(-1.0, 1.0), r2.min(1.0)))
}

/// One report line: correlation of a feature with its degraded self.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessEntry {
    pub degradation: String,
    pub method: Method,
    pub feature: String,
    /// `None` when fewer than 3 complete pairs or a side has zero variance.
    pub r: Option<f64>,
    pub r_squared: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RobustnessReport {
    pub entries: Vec<RobustnessEntry>,
}

/// Extract one clip's feature row for the given methods.
pub fn features_for_clip(
    clip: &AudioClip,
    species: &str,
    cfg: &AnalysisConfig,
    grid: &ChirpGrid,
    methods: &[Method],
) -> FeatureVector {
    let mut row = FeatureVector::new_missing(clip.source_id.clone(), species);
    for &method in methods {
        if let Ok(atoms) = extract(clip, cfg, grid, method) {
            row.set_method(method, summarize(&atoms, method));
        }
    }
    row
}

/// Compute clean and degraded feature tables over canonicalized clips and
/// correlate each feature column.
///
/// Noise seeds derive from `seed` and each clip's source id, so results do
/// not depend on corpus ordering or parallelism.
pub fn robustness_study(
    clips: &[AudioClip],
    degradations: &[Degradation],
    cfg: &AnalysisConfig,
    grid: &ChirpGrid,
    methods: &[Method],
    seed: u64,
    workdir: &Path,
    jobs: usize,
) -> Result<RobustnessReport, RobustnessError> {
    let clean: Vec<FeatureVector> = ordered_map(clips, jobs, |clip| {
        features_for_clip(clip, "", cfg, grid, methods)
    });
    let mut report = RobustnessReport::default();
    for degradation in degradations {
        let rows: Vec<Result<FeatureVector, String>> = match degradation {
            Degradation::WhiteNoise { level_dbfs } => ordered_map(clips, jobs, |clip| {
                let clip_seed = seed ^ fnv1a(clip.source_id.as_bytes());
                let noisy = add_white_noise(clip, *level_dbfs, clip_seed);
                Ok(features_for_clip(&noisy, "", cfg, grid, methods))
            }),
            Degradation::ExternalCodec { command } => {
                // Codec runs get per-clip work directories; concurrency is
                // bounded by `jobs` like everything else.
                let indexed: Vec<(usize, &AudioClip)> = clips.iter().enumerate().collect();
                ordered_map(&indexed, jobs, |(i, clip)| {
                    let dir = workdir.join(format!("codec_{i}"));
                    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
                    let out = degrade_codec(clip, command, &dir).map_err(|e| e.to_string());
                    let _ = std::fs::remove_dir_all(&dir);
                    let degraded = out?;
                    Ok(features_for_clip(&degraded, "", cfg, grid, methods))
                })
            }
        };
        // Fail fast on codec problems: a missing encoder is an environment
        // error, not a statistics result.
        let mut degraded_rows = Vec::with_capacity(rows.len());
        for row in rows {
            match row {
                Ok(r) => degraded_rows.push(r),
                Err(e) => {
                    return Err(RobustnessError::CodecUnavailable(e));
                }
            }
        }
        let names = feature_names();
        for (col, name) in names.iter().enumerate() {
            let method = Method::ALL[col / 7];
            if !methods.contains(&method) {
                continue;
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (c, d) in clean.iter().zip(&degraded_rows) {
                if let (Some(a), Some(b)) = (c.values[col], d.values[col]) {
                    xs.push(a);
                    ys.push(b);
                }
            }
            let entry = match pearson_r2(&xs, &ys) {
                Ok((r, r2)) => RobustnessEntry {
                    degradation: degradation.name().to_string(),
                    method,
                    feature: name.clone(),
                    r: Some(r),
                    r_squared: Some(r2),
                    n_pairs: xs.len(),
                },
                Err(_) => RobustnessEntry {
                    degradation: degradation.name().to_string(),
                    method,
                    feature: name.clone(),
                    r: None,
                    r_squared: None,
                    n_pairs: xs.len(),
                },
            };
            report.entries.push(entry);
        }
    }
    Ok(report)
}

/// Stable string hash for per-clip seed derivation.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Write the report as
/// `degradation,method,feature,r,r_squared,n_pairs`; correlations use
/// shortest round-trip formatting, insufficient entries stay empty.
pub fn write_report(report: &RobustnessReport, path: &Path) -> Result<(), RobustnessError> {
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| RobustnessError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = |line: String| -> std::io::Result<()> { writeln!(out, "{line}") };
    write("degradation,method,feature,r,r_squared,n_pairs".into()).map_err(|e| {
        RobustnessError::Io {
            path: display.clone(),
            source: e,
        }
    })?;
    for e in &report.entries {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        write(format!(
            "{},{},{},{},{},{}",
            e.degradation,
            e.method,
            e.feature,
            fmt(e.r),
            fmt(e.r_squared),
            e.n_pairs
        ))
        .map_err(|e| RobustnessError::Io {
            path: display.clone(),
            source: e,
        })?;
    }
    Ok(())
}
