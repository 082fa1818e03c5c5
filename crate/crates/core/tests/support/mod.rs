//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use kf_core::{GramMatrix, KernelBank, Matrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// `B B^T` for a random `m x rank` Gaussian `B`.
pub fn random_psd<R: Rng>(m: usize, rank: usize, rng: &mut R) -> Matrix {
    let b: Vec<f64> = (0..m * rank).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_fn(m, m, |i, j| {
        (0..rank).map(|r| b[i * rank + r] * b[j * rank + r]).sum()
    })
}

/// Random PSD kernels with unit diagonal.
pub fn random_normalized_bank<R: Rng>(n: usize, m: usize, rng: &mut R) -> KernelBank {
    let kernels = (0..n)
        .map(|k| {
            let rank = rng.gen_range(1..=m);
            let g = random_psd(m, rank, rng);
            let d: Vec<f64> = (0..m).map(|i| g[(i, i)].sqrt()).collect();
            let unit = Matrix::from_fn(m, m, |i, j| {
                if i == j {
                    1.0
                } else {
                    g[(i, j)] / (d[i] * d[j])
                }
            });
            GramMatrix::new(unit, format!("R{}", k + 1)).unwrap()
        })
        .collect();
    KernelBank::new(kernels).unwrap()
}

/// Smallest eigenvalue by symmetric eigendecomposition.
pub fn min_eigenvalue(g: &Matrix) -> f64 {
    let m = DMatrix::from_row_slice(g.rows(), g.cols(), g.as_slice());
    m.symmetric_eigenvalues().min()
}

pub fn dual_value(alpha: &[f64], y: &[f64], k: &Matrix) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximum of the SVM dual over a grid of the feasible set. The first
/// `n - 1` coefficients walk the grid; the last one is fixed by the
/// equality constraint and must land in the box. A second pass refines
/// around the best cell with step `fine`.
pub fn grid_dual_max(k: &Matrix, y: &[f64], c: f64, coarse: f64, fine: f64) -> f64 {
    let n = y.len();
    assert!((2..=3).contains(&n), "grid oracle only handles 2 or 3 points");
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let scan = |lo: &[f64], hi: &[f64], step: f64, best: &mut (f64, Vec<f64>)| {
        let counts: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| ((h - l) / step).round() as usize + 1)
            .collect();
        let total: usize = counts.iter().product();
        let mut alpha = vec![0.0; n];
        for flat in 0..total {
            let mut rest = flat;
            let mut balance = 0.0;
            for d in 0..n - 1 {
                let idx = rest % counts[d];
                rest /= counts[d];
                alpha[d] = (lo[d] + idx as f64 * step).min(c);
                balance += y[d] * alpha[d];
            }
            let last = -y[n - 1] * balance;
            if !(-1e-12..=c + 1e-12).contains(&last) {
                continue;
            }
            alpha[n - 1] = last.clamp(0.0, c);
            let v = dual_value(&alpha, y, k);
            if v > best.0 {
                *best = (v, alpha.clone());
            }
        }
    };
    scan(&vec![0.0; n - 1], &vec![c; n - 1], coarse, &mut best);
    let centre = best.1.clone();
    let lo: Vec<f64> = centre[..n - 1].iter().map(|a| (a - coarse).max(0.0)).collect();
    let hi: Vec<f64> = centre[..n - 1].iter().map(|a| (a + coarse).min(c)).collect();
    scan(&lo, &hi, fine, &mut best);
    best.0
}

/// Euclidean projection onto `{0 <= a <= c, y^T a = 0}`: the multiplier of
/// the equality constraint is found by bisection.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let balance = |lambda: f64| -> f64 {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c) * yi)
            .sum()
    };
    let span = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter()
        .zip(y)
        .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c))
        .collect()
}

/// Maximum of the SVM dual by accelerated projected gradient.
pub fn projected_gradient_dual_max(k: &Matrix, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = Matrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    // Frobenius norm bounds the largest eigenvalue.
    let lip = q.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[(i, j)] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut best = dual_value(&x, y, k);
    let mut checkpoint = best;
    for iter in 1..=20_000 {
        let g = grad(&z);
        let moved: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&moved, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        x = next;
        t = t_next;
        best = best.max(dual_value(&x, y, k));
        if iter % 2000 == 0 {
            if best - checkpoint < 1e-13 {
                break;
            }
            checkpoint = best;
        }
    }
    best
}

/// Random binary problem with both labels present.
pub fn random_problem<R: Rng>(n: usize, rng: &mut R) -> (Matrix, Vec<f64>) {
    let rank = rng.gen_range(1..=n);
    let k = random_psd(n, rank, rng);
    loop {
        let y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return (k, y);
        }
    }
}
