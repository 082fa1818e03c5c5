//! Binary C-SVM trained by sequential minimal optimization on a precomputed kernel.
//!
//! The dual is kept in minimization form, `min 1/2 a'Qa - 1'a` with
//! `Q[i,j] = y_i y_j K[i,j]`, `0 <= a_i <= C` and `y'a = 0`. Each step picks
//! the maximal violator `i` from the "up" set and a partner `j` from the
//! "low" set that violates the optimality gap by more than `kkt_tol` (the
//! most violating one or a uniformly random one, by coin flip), then solves
//! the two-variable subproblem in closed form.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SvmParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One dual coefficient per training point, in `[0, C]`.
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Training positions with `alpha > eps`.
    pub support_idx: Vec<usize>,
    /// `-1.0` / `+1.0` per training point.
    pub train_labels: Vec<f64>,
    pub c: f64,
    pub iterations: usize,
    /// Set when the iteration budget ran out before the KKT gap closed.
    pub non_converged: bool,
}

impl SvmModel {
    /// `f(x) = sum_i alpha_i y_i K(x, x_i) + bias` for each row of `cross_gram`
    /// (queries x training points).
    pub fn decision(&self, cross_gram: &Matrix) -> Result<Vec<f64>> {
        if cross_gram.cols() != self.alpha.len() {
            return Err(Error::Shape(format!(
                "cross gram has {} columns, model was trained on {} points",
                cross_gram.cols(),
                self.alpha.len()
            )));
        }
        Ok((0..cross_gram.rows())
            .map(|q| {
                let row = cross_gram.row(q);
                self.support_idx
                    .iter()
                    .map(|&s| self.alpha[s] * self.train_labels[s] * row[s])
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    /// Points strictly inside the box.
    pub fn free_idx(&self, eps: f64) -> Vec<usize> {
        self.alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > eps && a < self.c - eps)
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest KKT violation `y_i f(x_i)` vs. 1 over the training set.
    pub fn kkt_residual(&self, train_gram: &Matrix, eps: f64) -> Result<f64> {
        let f = self.decision(train_gram)?;
        let mut worst = 0.0f64;
        for (i, (&a, &y)) in self.alpha.iter().zip(&self.train_labels).enumerate() {
            let margin = y * f[i] - 1.0;
            let v = if a <= eps {
                (-margin).max(0.0)
            } else if a >= self.c - eps {
                margin.max(0.0)
            } else {
                margin.abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

/// Dual objective `sum a - 1/2 sum_ij a_i a_j y_i y_j K_ij` (to be maximized).
pub fn dual_objective(alpha: &[f64], labels: &[f64], gram: &Matrix) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * labels[i] * labels[j] * gram[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn validate(gram: &Matrix, labels: &[f64], params: &SvmParams) -> Result<()> {
    params.validate()?;
    if !gram.is_square() || gram.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "gram is {}x{} but there are {} labels",
            gram.rows(),
            gram.cols(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::Input(format!("binary labels must be +1 or -1, got {bad}")));
    }
    let has_pos = labels.iter().any(|&y| y > 0.0);
    let has_neg = labels.iter().any(|&y| y < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::Input("binary training needs both classes present".into()));
    }
    if !gram.all_finite() {
        return Err(Error::Input("gram matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Trains a binary C-SVM. `labels` are `+1.0` / `-1.0`.
pub fn train_binary<R: Rng + ?Sized>(
    gram: &Matrix,
    labels: &[f64],
    params: &SvmParams,
    rng: &mut R,
) -> Result<SvmModel> {
    validate(gram, labels, params)?;
    let n = labels.len();
    let c = params.c;
    let y = labels;
    let mut alpha = vec![0.0f64; n];
    // Gradient of the minimization-form dual: G = Q a - 1.
    let mut grad = vec![-1.0f64; n];

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut converged = false;
    let mut candidates = Vec::with_capacity(n);

    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_min = usize::MAX;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j_min = t;
            }
        }
        if i == usize::MAX || j_min == usize::MAX || m_up - m_low <= params.kkt_tol {
            converged = true;
            break;
        }

        let j = if rng.gen_bool(0.5) {
            j_min
        } else {
            candidates.clear();
            candidates.extend((0..n).filter(|&t| {
                t != i && in_low(alpha[t], y[t]) && -y[t] * grad[t] < m_up - params.kkt_tol
            }));
            *candidates.choose(rng).unwrap_or(&j_min)
        };

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (kii, kjj, kij) = (gram[(i, i)], gram[(j, j)], gram[(i, j)]);
        if y[i] != y[j] {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += y[k] * (y[i] * gram[(k, i)] * di + y[j] * gram[(k, j)] * dj);
        }
        iterations += 1;
    }

    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without reaching kkt_tol");
    }

    let bias = bias_from(&alpha, y, &grad, c, params.eps);
    let support_idx = alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > params.eps)
        .map(|(i, _)| i)
        .collect();
    Ok(SvmModel {
        alpha,
        bias,
        support_idx,
        train_labels: y.to_vec(),
        c,
        iterations,
        non_converged: !converged,
    })
}

/// Average of `-y_i G_i` over free vectors, or the midpoint of the interval
/// the bounded vectors allow when none are free.
fn bias_from(alpha: &[f64], y: &[f64], grad: &[f64], c: f64, eps: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for t in 0..alpha.len() {
        let b = -y[t] * grad[t];
        let at_lower = alpha[t] <= eps;
        let at_upper = alpha[t] >= c - eps;
        if !at_lower && !at_upper {
            free_sum += b;
            free_count += 1;
        } else if (at_lower && y[t] > 0.0) || (at_upper && y[t] < 0.0) {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}
