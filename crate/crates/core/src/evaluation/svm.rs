//! Binary soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimization with maximal-violating-pair working-set selection. No
//! randomness: identical inputs give identical models.

/// KKT violation tolerance at which optimization stops.
pub const KKT_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RbfSvm {
    gamma: f64,
    /// Support vectors (standardized feature rows).
    support: Vec<Vec<f64>>,
    /// alpha_i * y_i per support vector.
    coef: Vec<f64>,
    bias: f64,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl RbfSvm {
    /// Train on rows `x` with labels `y` in {-1, +1}.
    pub fn train(x: &[Vec<f64>], y: &[f64], gamma: f64, c: f64) -> RbfSvm {
        let n = x.len();
        assert!(n >= 2, "need at least two training rows");
        assert!(y.iter().all(|&v| v == 1.0 || v == -1.0));
        // Full kernel matrix; training sets here are small.
        let mut kernel = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let k = rbf(gamma, &x[i], &x[j]);
                kernel[i][j] = k;
                kernel[j][i] = k;
            }
        }
        let mut alpha = vec![0.0f64; n];
        // Gradient of the dual objective 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij.
        let mut grad = vec![-1.0f64; n];
        let max_iter = 10_000.max(100 * n);
        for _ in 0..max_iter {
            // Maximal violating pair.
            let mut i_sel = usize::MAX;
            let mut g_max = f64::NEG_INFINITY;
            let mut j_sel = usize::MAX;
            let mut g_min = f64::INFINITY;
            for t in 0..n {
                let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
                let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
                let v = -y[t] * grad[t];
                if up && v > g_max {
                    g_max = v;
                    i_sel = t;
                }
                if low && v < g_min {
                    g_min = v;
                    j_sel = t;
                }
            }
            if i_sel == usize::MAX || j_sel == usize::MAX || g_max - g_min < KKT_TOL {
                break;
            }
            let (i, j) = (i_sel, j_sel);

            // Two-variable analytic step with box clipping; the equality
            // constraint y'a = 0 is preserved throughout.
            let eta = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(1e-12);
            let old_ai = alpha[i];
            let old_aj = alpha[j];
            let (lo, hi) = if y[i] == y[j] {
                let gamma_sum = old_ai + old_aj;
                ((gamma_sum - c).max(0.0), gamma_sum.min(c))
            } else {
                let gamma_diff = old_aj - old_ai;
                (gamma_diff.max(0.0), (c + gamma_diff).min(c))
            };
            let mut aj = old_aj + y[j] * (y[i] * grad[i] - y[j] * grad[j]) / eta;
            aj = aj.clamp(lo, hi);
            let ai = old_ai + y[i] * y[j] * (old_aj - aj);
            let (d_i, d_j) = (ai - old_ai, aj - old_aj);
            if d_i.abs() < 1e-15 && d_j.abs() < 1e-15 {
                break;
            }
            alpha[i] = ai;
            alpha[j] = aj;
            for t in 0..n {
                grad[t] += y[t] * y[i] * kernel[t][i] * d_i + y[t] * y[j] * kernel[t][j] * d_j;
            }
        }

        // Bias from the KKT conditions: average -y_t grad_t over free
        // vectors, midpoint of the violating bounds otherwise.
        let mut free_sum = 0.0;
        let mut free_count = 0;
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && low {
                free_sum += v;
                free_count += 1;
            }
            if up {
                lb = lb.max(v);
            }
            if low {
                ub = ub.min(v);
            }
        }
        let bias = if free_count > 0 {
            free_sum / free_count as f64
        } else {
            (ub + lb) / 2.0
        };

        let mut support = Vec::new();
        let mut coef = Vec::new();
        for t in 0..n {
            if alpha[t] > 0.0 {
                support.push(x[t].clone());
                coef.push(alpha[t] * y[t]);
            }
        }
        RbfSvm {
            gamma,
            support,
            coef,
            bias,
        }
    }

    /// Decision value; positive means more like the +1 class.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (sv, &a) in self.support.iter().zip(&self.coef) {
            acc += a * rbf(self.gamma, sv, row);
        }
        acc
    }
}
