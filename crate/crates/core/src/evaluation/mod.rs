//! Species classification experiment: one-vs-rest RBF SVMs under seeded
//! stratified cross-validation, scored by prevalence-weighted AUC, over the
//! four feature subsets and four methods.

mod auc;
mod svm;

pub use auc::{binary_auc, weighted_auc};
pub use svm::{RbfSvm, KKT_TOL};

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::extract::Method;
use crate::features::{feature_names, FeatureVector};
use crate::parallel::ordered_map;
use crate::selection::LabelledTable;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("all feature columns are degenerate")]
    AllFeaturesDegenerate,
    #[error("feature column `{0}` not in schema")]
    SchemaMismatch(String),
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The paper's four evaluated feature subsets. Bandwidth features are never
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureSet {
    Fm,
    Freq,
    Top2,
    FmFreq,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::Fm,
        FeatureSet::Freq,
        FeatureSet::Top2,
        FeatureSet::FmFreq,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSet::Fm => "FM",
            FeatureSet::Freq => "Freq",
            FeatureSet::Top2 => "Top2",
            FeatureSet::FmFreq => "FMFreq",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureSet> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fm" => Some(FeatureSet::Fm),
            "freq" => Some(FeatureSet::Freq),
            "top2" => Some(FeatureSet::Top2),
            "fmfreq" | "fm+freq" => Some(FeatureSet::FmFreq),
            _ => None,
        }
    }

    /// Column names for one method.
    pub fn columns_for(&self, method: Method) -> Vec<String> {
        let stats: &[&str] = match self {
            FeatureSet::Fm => &["fm_med", "fm_75pc", "fm_95pc"],
            FeatureSet::Freq => &["freq_05pc", "freq_med", "freq_95pc"],
            FeatureSet::Top2 => &["freq_med", "fm_75pc"],
            FeatureSet::FmFreq => &[
                "fm_med",
                "fm_75pc",
                "fm_95pc",
                "freq_05pc",
                "freq_med",
                "freq_95pc",
            ],
        };
        stats.iter().map(|s| format!("{s}_{method}")).collect()
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cross-validation cell result.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub method: Method,
    pub feature_set: FeatureSet,
    pub fold: usize,
    pub weighted_auc: f64,
}

/// A trained one-vs-rest multiclass model with its standardization state.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub classes: Vec<String>,
    columns: Vec<usize>,
    kept: Vec<usize>,
    means: Vec<f64>,
    stds: Vec<f64>,
    binaries: Vec<RbfSvm>,
    /// Columns dropped for zero variance, by schema name.
    pub dropped_columns: Vec<String>,
}

fn column_indices(columns: &[String]) -> Result<Vec<usize>, EvalError> {
    let names = feature_names();
    columns
        .iter()
        .map(|c| {
            names
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| EvalError::SchemaMismatch(c.clone()))
        })
        .collect()
}

/// Train a one-vs-rest RBF SVM on the given feature columns.
///
/// Features are standardized to zero mean and unit variance on the training
/// statistics; zero-variance columns are dropped and reported.
pub fn train_svm(
    rows: &[&FeatureVector],
    columns: &[String],
    gamma: f64,
    c: f64,
) -> Result<SvmModel, EvalError> {
    let col_idx = column_indices(columns)?;
    let mut classes: Vec<String> = rows.iter().map(|r| r.species.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    let n = rows.len();
    let raw: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| col_idx.iter().map(|&ci| r.values[ci].unwrap()).collect())
        .collect();
    let mut means = vec![0.0f64; col_idx.len()];
    let mut stds = vec![0.0f64; col_idx.len()];
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..col_idx.len() {
        let mean: f64 = raw.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var: f64 = raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        means[j] = mean;
        stds[j] = var.sqrt();
        if stds[j] > 0.0 {
            kept.push(j);
        } else {
            dropped.push(columns[j].clone());
        }
    }
    if kept.is_empty() {
        return Err(EvalError::AllFeaturesDegenerate);
    }
    let x: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| kept.iter().map(|&j| (r[j] - means[j]) / stds[j]).collect())
        .collect();
    let binaries = classes
        .iter()
        .map(|class| {
            let y: Vec<f64> = rows
                .iter()
                .map(|r| if r.species == *class { 1.0 } else { -1.0 })
                .collect();
            RbfSvm::train(&x, &y, gamma, c)
        })
        .collect();
    Ok(SvmModel {
        classes,
        columns: col_idx,
        kept,
        means,
        stds,
        binaries,
        dropped_columns: dropped,
    })
}

impl SvmModel {
    fn standardize(&self, row: &FeatureVector) -> Option<Vec<f64>> {
        let raw: Option<Vec<f64>> = self.columns.iter().map(|&c| row.values[c]).collect();
        let raw = raw?;
        Some(
            self.kept
                .iter()
                .map(|&j| (raw[j] - self.means[j]) / self.stds[j])
                .collect(),
        )
    }
}

/// Per-class one-vs-rest decision values for each row; higher means more
/// class-like. Rows missing a required feature yield `None`.
pub fn decision_scores(model: &SvmModel, rows: &[&FeatureVector]) -> Vec<Option<Vec<f64>>> {
    rows.iter()
        .map(|row| {
            model.standardize(row).map(|x| {
                model
                    .binaries
                    .iter()
                    .map(|svm| svm.decision(&x))
                    .collect()
            })
        })
        .collect()
}

/// Experiment parameters. The hyperparameter grids and fold counts carry
/// the library defaults; every random choice flows from `seed`.
#[derive(Debug, Clone)]
pub struct ExperimentParams {
    pub folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub gamma_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub jobs: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            folds: 10,
            inner_folds: 3,
            seed: 0,
            gamma_grid: (-9..=1).map(|e| 2f64.powi(e)).collect(),
            c_grid: (-3..=7).map(|e| 2f64.powi(e)).collect(),
            jobs: 1,
        }
    }
}

/// Seeded stratified fold assignment: per class (sorted), row order is
/// shuffled and dealt cyclically. Classes smaller than the fold count end
/// up round-robin distributed; the caller is warned through the returned
/// flag.
pub fn stratified_folds(
    table: &LabelledTable,
    folds: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<String>), EvalError> {
    if folds < 2 {
        return Err(EvalError::TooFewFolds(folds));
    }
    let classes = table.classes();
    let mut assignment = vec![0usize; table.rows.len()];
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deal = 0usize;
    for class in &classes {
        let mut members: Vec<usize> = table
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| &r.species == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < folds {
            warnings.push(format!(
                "species `{class}` has {} recordings for {folds} folds; assigning round-robin",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        for idx in members {
            assignment[idx] = deal % folds;
            deal += 1;
        }
    }
    Ok((assignment, warnings))
}

fn inner_grid_search(
    train_rows: &[&FeatureVector],
    columns: &[String],
    params: &ExperimentParams,
    cell_seed: u64,
) -> Result<(f64, f64), EvalError> {
    // Stratified inner split over the training rows.
    let mut classes: Vec<&str> = train_rows.iter().map(|r| r.species.as_str()).collect();
    classes.sort();
    classes.dedup();
    let class_of = |r: &FeatureVector| classes.iter().position(|c| *c == r.species).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
    let mut assignment = vec![0usize; train_rows.len()];
    let mut deal = 0usize;
    for class in &classes {
        let mut members: Vec<usize> = train_rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.species == *class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for idx in members {
            assignment[idx] = deal % params.inner_folds;
            deal += 1;
        }
    }
    let mut best: Option<(f64, f64, f64)> = None; // (score, gamma, c)
    for &gamma in &params.gamma_grid {
        for &c in &params.c_grid {
            let mut scores = Vec::new();
            for fold in 0..params.inner_folds {
                let tr: Vec<&FeatureVector> = train_rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| assignment[*i] != fold)
                    .map(|(_, r)| *r)
                    .collect();
                let te: Vec<&FeatureVector> = train_rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| assignment[*i] == fold)
                    .map(|(_, r)| *r)
                    .collect();
                if te.is_empty() {
                    continue;
                }
                let Ok(model) = train_svm(&tr, columns, gamma, c) else {
                    continue;
                };
                let labels: Vec<usize> = te.iter().map(|r| class_of(r)).collect();
                if labels.iter().all(|&l| l == labels[0]) {
                    continue;
                }
                // Score against the model's own class list.
                let model_class_of = |r: &FeatureVector| {
                    model.classes.iter().position(|c| *c == r.species)
                };
                let mut sc = Vec::new();
                let mut ls = Vec::new();
                for (row, s) in te.iter().zip(decision_scores(&model, &te)) {
                    if let (Some(ci), Some(s)) = (model_class_of(row), s) {
                        ls.push(ci);
                        sc.push(s);
                    }
                }
                if let Ok(auc) = weighted_auc(&sc, &ls, model.classes.len()) {
                    scores.push(auc);
                }
            }
            if scores.is_empty() {
                continue;
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            if best.map_or(true, |(b, _, _)| mean > b) {
                best = Some((mean, gamma, c));
            }
        }
    }
    let (_, gamma, c) = best.ok_or(EvalError::SingleClass)?;
    Ok((gamma, c))
}

/// Run the full classification experiment.
///
/// The outer stratified split is fixed by `params.seed` and shared across
/// every method x feature-set cell (a repeated-measures layout); gamma and
/// C are chosen per cell by an inner stratified grid search on the training
/// rows only.
pub fn run_experiment(
    table: &LabelledTable,
    methods: &[Method],
    feature_sets: &[FeatureSet],
    params: &ExperimentParams,
) -> Result<(Vec<FoldResult>, Vec<String>), EvalError> {
    let (assignment, mut warnings) = stratified_folds(table, params.folds, params.seed)?;
    let classes = table.classes();
    let class_of = |r: &FeatureVector| classes.iter().position(|c| *c == r.species).unwrap();

    struct Cell {
        method: Method,
        set: FeatureSet,
        fold: usize,
        seed: u64,
    }
    let mut cells = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        for (si, &set) in feature_sets.iter().enumerate() {
            for fold in 0..params.folds {
                // Stable per-cell seed for the inner split.
                let seed = params
                    .seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((mi * 4 + si) as u64 * 1_009 + fold as u64);
                cells.push(Cell {
                    method,
                    set,
                    fold,
                    seed,
                });
            }
        }
    }

    let outputs = ordered_map(&cells, params.jobs, |cell| {
        let columns = cell.set.columns_for(cell.method);
        let col_idx = match column_indices(&columns) {
            Ok(v) => v,
            Err(e) => return Err(format!("{e}")),
        };
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, row) in table.rows.iter().enumerate() {
            if col_idx.iter().any(|&c| row.values[c].is_none()) {
                continue;
            }
            if assignment[i] == cell.fold {
                test.push(row);
            } else {
                train.push(row);
            }
        }
        if test.is_empty() {
            return Err(format!(
                "{}/{} fold {}: empty test fold after missing-value filtering",
                cell.method, cell.set, cell.fold
            ));
        }
        let (gamma, c) = match inner_grid_search(&train, &columns, params, cell.seed) {
            Ok(v) => v,
            Err(e) => {
                return Err(format!(
                    "{}/{} fold {}: {e}",
                    cell.method, cell.set, cell.fold
                ))
            }
        };
        let model = match train_svm(&train, &columns, gamma, c) {
            Ok(m) => m,
            Err(e) => {
                return Err(format!(
                    "{}/{} fold {}: {e}",
                    cell.method, cell.set, cell.fold
                ))
            }
        };
        // Model classes may be a subset of the table's if filtering dropped
        // one entirely; score against the table indexing via the model's.
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (row, s) in test.iter().zip(decision_scores(&model, &test)) {
            if let Some(s) = s {
                // Map decision columns back onto the full class list.
                let mut full = vec![f64::NEG_INFINITY; classes.len()];
                for (k, cname) in model.classes.iter().enumerate() {
                    let ci = classes.iter().position(|c| c == cname).unwrap();
                    full[ci] = s[k];
                }
                scores.push(full);
                labels.push(class_of(row));
            }
        }
        match weighted_auc(&scores, &labels, classes.len()) {
            Ok(auc) => Ok(FoldResult {
                method: cell.method,
                feature_set: cell.set,
                fold: cell.fold,
                weighted_auc: auc,
            }),
            Err(e) => Err(format!(
                "{}/{} fold {}: {e}",
                cell.method, cell.set, cell.fold
            )),
        }
    });

    let mut results = Vec::new();
    for out in outputs {
        match out {
            Ok(r) => results.push(r),
            Err(w) => warnings.push(w),
        }
    }
    Ok((results, warnings))
}

/// Write fold results as `method,feature_set,fold,weighted_auc` with the
/// AUC at four decimals.
pub fn write_fold_results(results: &[FoldResult], path: &Path) -> Result<(), EvalError> {
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| EvalError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = |line: String| -> std::io::Result<()> { writeln!(out, "{line}") };
    write("method,feature_set,fold,weighted_auc".into()).map_err(|e| EvalError::Io {
        path: display.clone(),
        source: e,
    })?;
    for r in results {
        write(format!(
            "{},{},{},{:.4}",
            r.method, r.feature_set, r.fold, r.weighted_auc
        ))
        .map_err(|e| EvalError::Io {
            path: display.clone(),
            source: e,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// A table whose `fm_*` features separate the two species and whose
    /// `freq_*` features carry nothing.
    fn fm_separable_table(n_per: usize, seed: u64) -> LabelledTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for i in 0..n_per * 2 {
            let slow = i % 2 == 0;
            let species = if slow { "slow" } else { "fast" };
            let mut row = FeatureVector::new_missing(format!("clip{i}"), species);
            for method in Method::ALL {
                let base_fm = if slow { 5_000.0 } else { 50_000.0 };
                let jitter = 1.0 + 0.05 * rng.gen::<f64>();
                let freq = 5_000.0 + rng.gen::<f64>() * 100.0;
                row.set_method(
                    method,
                    [
                        Some(freq - 500.0),
                        Some(freq),
                        Some(freq + 500.0),
                        Some(1_000.0),
                        Some(base_fm * jitter),
                        Some(base_fm * jitter * 1.2),
                        Some(base_fm * jitter * 1.4),
                    ],
                );
            }
            rows.push(row);
        }
        LabelledTable::new(rows).unwrap()
    }

    #[test]
    fn feature_set_columns() {
        assert_eq!(
            FeatureSet::Fm.columns_for(Method::Mp),
            vec!["fm_med_mp", "fm_75pc_mp", "fm_95pc_mp"]
        );
        assert_eq!(
            FeatureSet::Top2.columns_for(Method::Ss),
            vec!["freq_med_ss", "fm_75pc_ss"]
        );
        assert_eq!(FeatureSet::FmFreq.columns_for(Method::Dd).len(), 6);
        // Bandwidth never appears.
        for set in FeatureSet::ALL {
            for m in Method::ALL {
                assert!(set.columns_for(m).iter().all(|c| !c.contains("bw")));
            }
        }
    }

    #[test]
    fn train_requires_two_classes() {
        let table = fm_separable_table(4, 0);
        let rows: Vec<&FeatureVector> = table
            .rows
            .iter()
            .filter(|r| r.species == "slow")
            .collect();
        assert!(matches!(
            train_svm(&rows, &FeatureSet::Fm.columns_for(Method::Ss), 0.5, 1.0),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn degenerate_column_dropped() {
        let mut table = fm_separable_table(6, 1);
        for row in &mut table.rows {
            let i = crate::features::feature_index(Method::Ss, 4); // fm_med_ss
            row.values[i] = Some(7.0);
        }
        let rows: Vec<&FeatureVector> = table.rows.iter().collect();
        let model = train_svm(&rows, &FeatureSet::Fm.columns_for(Method::Ss), 0.5, 1.0).unwrap();
        assert_eq!(model.dropped_columns, vec!["fm_med_ss".to_string()]);
    }

    #[test]
    fn separable_table_classifies_perfectly() {
        let table = fm_separable_table(10, 2);
        let rows: Vec<&FeatureVector> = table.rows.iter().collect();
        let model = train_svm(&rows, &FeatureSet::Fm.columns_for(Method::Ss), 0.5, 10.0).unwrap();
        let scores = decision_scores(&model, &rows);
        for (row, s) in rows.iter().zip(scores) {
            let s = s.unwrap();
            let predicted = &model.classes[if s[0] > s[1] { 0 } else { 1 }];
            assert_eq!(predicted, &row.species);
        }
    }

    #[test]
    fn stratified_folds_partition_and_balance() {
        let table = fm_separable_table(20, 3);
        let (assignment, warnings) = stratified_folds(&table, 10, 7).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(assignment.len(), 40);
        for fold in 0..10 {
            let in_fold: Vec<usize> = (0..40).filter(|&i| assignment[i] == fold).collect();
            assert_eq!(in_fold.len(), 4);
            let slow = in_fold
                .iter()
                .filter(|&&i| table.rows[i].species == "slow")
                .count();
            assert_eq!(slow, 2); // 20 per class over 10 folds
        }
    }

    #[test]
    fn tiny_class_round_robin_warns() {
        let mut rows = fm_separable_table(8, 4).rows;
        let mut extra = rows[0].clone();
        extra.source_id = "rare".into();
        extra.species = "rare".into();
        rows.push(extra);
        let table = LabelledTable::new(rows).unwrap();
        let (_, warnings) = stratified_folds(&table, 5, 1).unwrap();
        assert!(warnings.iter().any(|w| w.contains("rare")));
    }

    #[test]
    fn experiment_shape_and_determinism() {
        let table = fm_separable_table(6, 5);
        let params = ExperimentParams {
            folds: 3,
            inner_folds: 2,
            gamma_grid: vec![0.125, 0.5],
            c_grid: vec![1.0, 8.0],
            seed: 42,
            jobs: 2,
        };
        let methods = [Method::Ss, Method::Dd];
        let sets = [FeatureSet::Fm, FeatureSet::Freq];
        let (a, _) = run_experiment(&table, &methods, &sets, &params).unwrap();
        assert_eq!(a.len(), 2 * 2 * 3);
        let (b, _) = run_experiment(&table, &methods, &sets, &params).unwrap();
        assert_eq!(a, b);
        // FM separates, Freq does not.
        let mean = |set: FeatureSet| {
            let v: Vec<f64> = a
                .iter()
                .filter(|r| r.feature_set == set)
                .map(|r| r.weighted_auc)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(FeatureSet::Fm) > 0.95, "FM mean {}", mean(FeatureSet::Fm));
        assert!(
            mean(FeatureSet::Freq) < 0.75,
            "Freq mean {}",
            mean(FeatureSet::Freq)
        );
    }

    #[test]
    fn test_fold_never_influences_training() {
        // Leakage check: perturbing test-fold labels leaves the model's
        // decisions unchanged.
        let table = fm_separable_table(6, 6);
        let (assignment, _) = stratified_folds(&table, 3, 9).unwrap();
        let columns = FeatureSet::Fm.columns_for(Method::Ss);
        let train: Vec<&FeatureVector> = table
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| assignment[*i] != 0)
            .map(|(_, r)| r)
            .collect();
        let model = train_svm(&train, &columns, 0.5, 1.0).unwrap();
        let mut shuffled = table.rows.clone();
        for (i, row) in shuffled.iter_mut().enumerate() {
            if assignment[i] == 0 {
                row.species = format!("scrambled-{i}");
            }
        }
        let train2: Vec<&FeatureVector> = shuffled
            .iter()
            .enumerate()
            .filter(|(i, _)| assignment[*i] != 0)
            .map(|(_, r)| r)
            .collect();
        let model2 = train_svm(&train2, &columns, 0.5, 1.0).unwrap();
        let probe: Vec<&FeatureVector> = table.rows.iter().take(5).collect();
        let s1 = decision_scores(&model, &probe);
        let s2 = decision_scores(&model2, &probe);
        assert_eq!(s1, s2);
    }

    #[test]
    fn fold_results_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("folds.csv");
        let results = vec![FoldResult {
            method: Method::Ss,
            feature_set: FeatureSet::Fm,
            fold: 0,
            weighted_auc: 0.98765,
        }];
        write_fold_results(&results, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "method,feature_set,fold,weighted_auc\nss,FM,0,0.9877\n");
    }
}
