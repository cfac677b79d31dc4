//! Information-gain feature ranking with supervised MDL discretization.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::features::{feature_names, FeatureVector, FEATURE_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("need at least two distinct species, found {0}")]
    TooFewSpecies(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Feature rows joined with species labels.
#[derive(Debug, Clone)]
pub struct LabelledTable {
    pub rows: Vec<FeatureVector>,
    pub class_counts: BTreeMap<String, usize>,
}

impl LabelledTable {
    pub fn new(rows: Vec<FeatureVector>) -> Result<LabelledTable, SelectionError> {
        let mut class_counts = BTreeMap::new();
        for row in &rows {
            *class_counts.entry(row.species.clone()).or_insert(0) += 1;
        }
        if class_counts.len() < 2 {
            return Err(SelectionError::TooFewSpecies(class_counts.len()));
        }
        Ok(LabelledTable { rows, class_counts })
    }

    /// Species labels in sorted order (the canonical class indexing).
    pub fn classes(&self) -> Vec<String> {
        self.class_counts.keys().cloned().collect()
    }
}

/// Shannon entropy in bits of a count (or weight) distribution.
pub fn entropy(weights: &[f64]) -> Result<f64, SelectionError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(SelectionError::EmptyDistribution);
    }
    let mut h = 0.0;
    for &w in weights {
        if w > 0.0 {
            let p = w / total;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

fn class_entropy(labels: &[usize], n_classes: usize) -> f64 {
    let mut counts = vec![0.0f64; n_classes];
    for &l in labels {
        counts[l] += 1.0;
    }
    entropy(&counts).unwrap_or(0.0)
}

fn distinct_classes(labels: &[usize]) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for &l in labels {
        seen.insert(l);
    }
    seen.len()
}

/// Recursive entropy-minimizing binary splits accepted by the
/// Fayyad-Irani MDL criterion. Returns ascending cut points (possibly
/// empty, meaning the feature carries no usable information).
pub fn discretize_mdl(values: &[f64], labels: &[usize], n_classes: usize) -> Vec<f64> {
    assert_eq!(values.len(), labels.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<(f64, usize)> = order.iter().map(|&i| (values[i], labels[i])).collect();
    let mut cuts = Vec::new();
    split_recursive(&sorted, n_classes, &mut cuts);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts
}

fn split_recursive(sorted: &[(f64, usize)], n_classes: usize, cuts: &mut Vec<f64>) {
    let n = sorted.len();
    if n < 2 {
        return;
    }
    let labels: Vec<usize> = sorted.iter().map(|&(_, l)| l).collect();
    let h_all = class_entropy(&labels, n_classes);
    if h_all == 0.0 {
        return;
    }

    // Best boundary by class-conditional entropy, scanning candidate cuts
    // between adjacent distinct values with left-side class counts updated
    // incrementally.
    let mut left = vec![0.0f64; n_classes];
    let mut right = vec![0.0f64; n_classes];
    for &(_, l) in sorted {
        right[l] += 1.0;
    }
    let mut best: Option<(f64, usize)> = None; // (weighted entropy, split index)
    for i in 0..n - 1 {
        let (v, l) = sorted[i];
        left[l] += 1.0;
        right[l] -= 1.0;
        if sorted[i + 1].0 == v {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let h = (nl * entropy(&left).unwrap_or(0.0) + nr * entropy(&right).unwrap_or(0.0))
            / n as f64;
        if best.map_or(true, |(bh, _)| h < bh) {
            best = Some((h, i));
        }
    }
    let Some((h_split, split_at)) = best else {
        return; // all values identical
    };

    let left_part = &sorted[..=split_at];
    let right_part = &sorted[split_at + 1..];
    let left_labels: Vec<usize> = left_part.iter().map(|&(_, l)| l).collect();
    let right_labels: Vec<usize> = right_part.iter().map(|&(_, l)| l).collect();

    // Fayyad-Irani MDL acceptance.
    let gain = h_all - h_split;
    let k = distinct_classes(&labels) as f64;
    let k1 = distinct_classes(&left_labels) as f64;
    let k2 = distinct_classes(&right_labels) as f64;
    let h1 = class_entropy(&left_labels, n_classes);
    let h2 = class_entropy(&right_labels, n_classes);
    let delta = (3f64.powf(k) - 2.0).log2() - (k * h_all - k1 * h1 - k2 * h2);
    let threshold = ((n as f64 - 1.0).log2() + delta) / n as f64;
    if gain <= threshold {
        return;
    }

    cuts.push((sorted[split_at].0 + sorted[split_at + 1].0) / 2.0);
    split_recursive(left_part, n_classes, cuts);
    split_recursive(right_part, n_classes, cuts);
}

/// Information gain of one feature column against the labels, in bits.
///
/// Rows with missing values are excluded and the gain is scaled by the
/// non-missing fraction, so sparsely populated features cannot look
/// artificially informative.
pub fn information_gain(values: &[Option<f64>], labels: &[usize], n_classes: usize) -> f64 {
    assert_eq!(values.len(), labels.len());
    let mut vs = Vec::new();
    let mut ls = Vec::new();
    for (v, &l) in values.iter().zip(labels) {
        if let Some(x) = v {
            if x.is_finite() {
                vs.push(*x);
                ls.push(l);
            }
        }
    }
    if vs.len() < 2 {
        return 0.0;
    }
    let cuts = discretize_mdl(&vs, &ls, n_classes);
    let h_all = class_entropy(&ls, n_classes);
    if cuts.is_empty() {
        return 0.0;
    }
    // Conditional entropy over the discretized bins.
    let n_bins = cuts.len() + 1;
    let mut bins: Vec<Vec<f64>> = vec![vec![0.0; n_classes]; n_bins];
    for (v, &l) in vs.iter().zip(&ls) {
        let bin = cuts.partition_point(|c| c < v);
        bins[bin][l] += 1.0;
    }
    let n = vs.len() as f64;
    let mut h_cond = 0.0;
    for counts in &bins {
        let nb: f64 = counts.iter().sum();
        if nb > 0.0 {
            h_cond += nb / n * entropy(counts).unwrap_or(0.0);
        }
    }
    let fraction = vs.len() as f64 / values.len() as f64;
    (fraction * (h_all - h_cond)).max(0.0)
}

/// A ranked feature list, descending information gain, alphabetical
/// tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct IGRanking {
    pub entries: Vec<(String, f64)>,
}

/// Rank every feature column of the table by information gain.
pub fn rank_features(table: &LabelledTable) -> IGRanking {
    let classes = table.classes();
    let class_index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labels: Vec<usize> = table
        .rows
        .iter()
        .map(|r| class_index[r.species.as_str()])
        .collect();
    let names = feature_names();
    let mut entries: Vec<(String, f64)> = (0..FEATURE_COUNT)
        .map(|col| {
            let column: Vec<Option<f64>> = table.rows.iter().map(|r| r.values[col]).collect();
            (
                names[col].clone(),
                information_gain(&column, &labels, classes.len()),
            )
        })
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    IGRanking { entries }
}

/// Write a ranking as `rank,ig,feature` rows with IG at four decimals.
pub fn write_ranking(ranking: &IGRanking, path: &Path) -> Result<(), SelectionError> {
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| SelectionError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = |line: String| -> std::io::Result<()> { writeln!(out, "{line}") };
    write("rank,ig,feature".into()).map_err(|e| SelectionError::Io {
        path: display.clone(),
        source: e,
    })?;
    for (i, (name, ig)) in ranking.entries.iter().enumerate() {
        write(format!("{},{:.4},{}", i + 1, ig, name)).map_err(|e| SelectionError::Io {
            path: display.clone(),
            source: e,
        })?;
    }
    Ok(())
}
