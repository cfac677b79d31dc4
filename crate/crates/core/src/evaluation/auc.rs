//! Prevalence-weighted one-vs-rest area under the ROC curve.

use super::EvalError;

/// AUC of `scores` ranking positives above negatives, via the rank-sum
/// (Mann-Whitney) statistic with ties contributing one half.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tied score runs.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..j] {
            if positive[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Weighted mean of per-class one-vs-rest AUCs, weights = class prevalence
/// among `labels`. `scores[row][class]` are the per-class decision values.
pub fn weighted_auc(
    scores: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len());
    let n = labels.len();
    if n == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut acc = 0.0;
    let mut weight_total = 0.0;
    let mut seen_any = false;
    for class in 0..n_classes {
        let positive: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        let n_pos = positive.iter().filter(|&&p| p).count();
        if n_pos == 0 {
            continue;
        }
        if n_pos == n {
            return Err(EvalError::SingleClass);
        }
        let column: Vec<f64> = scores.iter().map(|row| row[class]).collect();
        let auc = binary_auc(&column, &positive)?;
        let w = n_pos as f64 / n as f64;
        acc += w * auc;
        weight_total += w;
        seen_any = true;
    }
    if !seen_any {
        return Err(EvalError::SingleClass);
    }
    Ok(acc / weight_total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Brute-force pair-counting oracle.
    fn auc_oracle(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &pi) in positive.iter().enumerate() {
            if !pi {
                continue;
            }
            for (j, &pj) in positive.iter().enumerate() {
                if pj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_and_inverted() {
        let scores = vec![0.9, 0.8, 0.2, 0.1];
        let labels = vec![true, true, false, false];
        assert_eq!(binary_auc(&scores, &labels).unwrap(), 1.0);
        let inverted: Vec<f64> = scores.iter().map(|s| -s).collect();
        assert_eq!(binary_auc(&inverted, &labels).unwrap(), 0.0);
    }

    #[test]
    fn ties_contribute_half() {
        let scores = vec![0.5, 0.5, 0.5, 0.5];
        let labels = vec![true, false, true, false];
        assert_eq!(binary_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn matches_pair_counting_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let n = 200;
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.gen::<f64>() * 8.0).round() / 8.0)
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
            if labels.iter().all(|&l| l) || !labels.iter().any(|&l| l) {
                continue;
            }
            let fast = binary_auc(&scores, &labels).unwrap();
            let slow = auc_oracle(&scores, &labels);
            assert!((fast - slow).abs() < 1e-9, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn weighted_auc_perfect_multiclass() {
        // Scores that rank every class above the rest.
        let labels = vec![0, 0, 1, 2, 2, 2];
        let scores: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let mut row = vec![-1.0; 3];
                row[l] = 1.0;
                row
            })
            .collect();
        assert_eq!(weighted_auc(&scores, &labels, 3).unwrap(), 1.0);
    }

    #[test]
    fn weighted_auc_random_scores_near_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let mut grand = 0.0;
        let trials = 100;
        for _ in 0..trials {
            let n = 500;
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
                .collect();
            grand += weighted_auc(&scores, &labels, 3).unwrap();
        }
        let mean = grand / trials as f64;
        assert!((mean - 0.5).abs() < 0.05, "grand mean {mean}");
    }

    #[test]
    fn invariant_under_monotone_score_transform() {
        let labels = vec![0, 1, 0, 1, 1, 0, 0, 1];
        let scores: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.61).cos()])
            .collect();
        let transformed: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| row.iter().map(|&s| (3.0 * s).exp()).collect())
            .collect();
        let a = weighted_auc(&scores, &labels, 2).unwrap();
        let b = weighted_auc(&transformed, &labels, 2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_error() {
        let scores = vec![vec![0.1], vec![0.3]];
        assert!(matches!(
            weighted_auc(&scores, &[0, 0], 1),
            Err(EvalError::SingleClass)
        ));
    }
}
