//! Per-recording summary features and the labelled feature table format.
//!
//! Each recording yields seven statistics per method: the 5th/50th/95th
//! percentiles of atom frequency, the 5-95 percentile bandwidth, and the
//! 50th/75th/95th percentiles of absolute FM rate. Tables are
//! delimiter-separated text with a fixed 30-column schema; missing features
//! are empty fields.

use std::io::Write as _;
use std::path::Path;

use crate::extract::{Atom, Method};

/// Statistic names in column order within one method block.
pub const STAT_NAMES: [&str; 7] = [
    "freq_05pc",
    "freq_med",
    "freq_95pc",
    "freq_bw",
    "fm_med",
    "fm_75pc",
    "fm_95pc",
];

/// Number of feature columns (7 statistics x 4 methods).
pub const FEATURE_COUNT: usize = 28;

/// The 28 feature column names, method-major: `freq_05pc_ss .. fm_95pc_dd`.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for method in Method::ALL {
        for stat in STAT_NAMES {
            names.push(format!("{stat}_{method}"));
        }
    }
    names
}

/// Column index of a (method, statistic) pair.
pub fn feature_index(method: Method, stat: usize) -> usize {
    let mpos = Method::ALL.iter().position(|m| *m == method).unwrap();
    mpos * STAT_NAMES.len() + stat
}

/// One recording's feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub source_id: String,
    pub species: String,
    /// `FEATURE_COUNT` values in [`feature_names`] order; `None` = missing.
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn new_missing(source_id: impl Into<String>, species: impl Into<String>) -> Self {
        FeatureVector {
            source_id: source_id.into(),
            species: species.into(),
            values: vec![None; FEATURE_COUNT],
        }
    }

    /// Install one method's seven statistics.
    pub fn set_method(&mut self, method: Method, stats: [Option<f64>; 7]) {
        for (i, v) in stats.into_iter().enumerate() {
            self.values[feature_index(method, i)] = v;
        }
    }

    pub fn get(&self, method: Method, stat: usize) -> Option<f64> {
        self.values[feature_index(method, stat)]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("empty input")]
    EmptyInput,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Linear-interpolation percentile: sort ascending, index
/// `h = (n-1) p / 100`, interpolate between the bracketing order statistics.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    assert!((0.0..=100.0).contains(&p), "percentile out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Summarize one method's atom list into its seven statistics.
///
/// Frequency statistics run over atom frequencies; FM statistics over the
/// magnitude of the FM rate. An empty atom list marks every statistic
/// missing rather than inventing zeros.
pub fn summarize(atoms: &[Atom], method: Method) -> [Option<f64>; 7] {
    debug_assert!(atoms.iter().all(|a| a.method == method));
    if atoms.is_empty() {
        return [None; 7];
    }
    let freqs: Vec<f64> = atoms.iter().map(|a| a.frequency_hz).collect();
    let fms: Vec<f64> = atoms.iter().map(|a| a.fm_rate_hz_s.abs()).collect();
    let f05 = percentile(&freqs, 5.0).unwrap();
    let f50 = percentile(&freqs, 50.0).unwrap();
    let f95 = percentile(&freqs, 95.0).unwrap();
    [
        Some(f05),
        Some(f50),
        Some(f95),
        Some(f95 - f05),
        Some(percentile(&fms, 50.0).unwrap()),
        Some(percentile(&fms, 75.0).unwrap()),
        Some(percentile(&fms, 95.0).unwrap()),
    ]
}

fn full_header() -> Vec<String> {
    let mut cols = vec!["source_id".to_string(), "species".to_string()];
    cols.extend(feature_names());
    cols
}

/// Write a feature table. Floats use shortest round-trip formatting so
/// `read_table(write_table(rows))` restores the rows exactly.
pub fn write_table(rows: &[FeatureVector], path: &Path) -> Result<(), FeatureError> {
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| FeatureError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut out = std::io::BufWriter::new(file);
    let mut emit = |fields: &[String]| -> std::io::Result<()> {
        writeln!(out, "{}", fields.join(","))
    };
    emit(&full_header()).map_err(|e| FeatureError::Io {
        path: display.clone(),
        source: e,
    })?;
    for row in rows {
        let mut fields = vec![row.source_id.clone(), row.species.clone()];
        for v in &row.values {
            fields.push(match v {
                Some(x) => format!("{x}"),
                None => String::new(),
            });
        }
        emit(&fields).map_err(|e| FeatureError::Io {
            path: display.clone(),
            source: e,
        })?;
    }
    Ok(())
}

/// Read a table produced by [`write_table`]. Any unknown, missing or
/// reordered column is a schema mismatch.
pub fn read_table(path: &Path) -> Result<Vec<FeatureVector>, FeatureError> {
    let display = path.display().to_string();
    let content = std::fs::read_to_string(path).map_err(|e| FeatureError::Io {
        path: display,
        source: e,
    })?;
    let delimiter = content
        .lines()
        .next()
        .map(|h| if h.contains('\t') { '\t' } else { ',' })
        .unwrap_or(',');
    let mut lines = content.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| FeatureError::SchemaMismatch("empty file".into()))?
        .split(delimiter)
        .collect();
    let expected = full_header();
    if header.len() != expected.len() {
        return Err(FeatureError::SchemaMismatch(format!(
            "expected {} columns, found {}",
            expected.len(),
            header.len()
        )));
    }
    for (h, e) in header.iter().zip(&expected) {
        if h.trim() != e {
            return Err(FeatureError::SchemaMismatch(format!(
                "unexpected column `{h}` (expected `{e}`)"
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).collect();
        if fields.len() != expected.len() {
            return Err(FeatureError::BadRow {
                row: i + 1,
                detail: format!("{} fields", fields.len()),
            });
        }
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        for (ci, raw) in fields[2..].iter().enumerate() {
            if raw.is_empty() {
                values.push(None);
            } else {
                let v: f64 = raw.parse().map_err(|_| FeatureError::BadRow {
                    row: i + 1,
                    detail: format!("bad number `{raw}` in column {}", ci + 2),
                })?;
                values.push(Some(v));
            }
        }
        rows.push(FeatureVector {
            source_id: fields[0].to_string(),
            species: fields[1].to_string(),
            values,
        });
    }
    Ok(rows)
}
