//! Binary L1-loss SVM solved in the dual by coordinate descent.
//!
//! Primal: `min_w 1/2 |w|^2 + U sum_i max(0, 1 - y_i w·x_i)` with `U = C / n`,
//! so `C` weights the mean hinge loss and duplicating every example leaves the
//! optimum unchanged. The bias is an extra constant feature appended to every
//! example. Coordinates are visited in a ChaCha-seeded random order each
//! epoch; the solver stops once the duality gap falls to `tol * primal`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::descriptor::dot;

/// Epoch cap; reaching it is logged, not an error.
pub const MAX_EPOCHS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub epochs: usize,
    pub relative_gap: f64,
}

/// Solves one binary problem over `rows` (each followed implicitly by the
/// constant `bias_feature`). Returns `(w, b, stats)` with `b` the weight of
/// the constant feature times `bias_feature`.
pub fn solve_linear(
    rows: &[&[f64]],
    y: &[f64],
    bias_feature: f64,
    c: f64,
    tol: f64,
    seed: u64,
) -> (Vec<f64>, f64, SolveStats) {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    let upper = c / n as f64;
    let b2 = bias_feature * bias_feature;
    let diag: Vec<f64> = rows.iter().map(|r| dot(r, r) + b2).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut wb = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SolveStats {
        epochs: 0,
        relative_gap: f64::INFINITY,
    };
    while stats.epochs < MAX_EPOCHS {
        order.shuffle(&mut rng);
        for &i in &order {
            if diag[i] <= 0.0 {
                continue;
            }
            let g = y[i] * (dot(&w, rows[i]) + wb * bias_feature) - 1.0;
            let a = alpha[i];
            let next = (a - g / diag[i]).clamp(0.0, upper);
            let delta = (next - a) * y[i];
            if delta != 0.0 {
                alpha[i] = next;
                axpy(delta, rows[i], &mut w);
                wb += delta * bias_feature;
            }
        }
        stats.epochs += 1;
        let w2 = dot(&w, &w) + wb * wb;
        let hinge: f64 = (0..n)
            .map(|i| (1.0 - y[i] * (dot(&w, rows[i]) + wb * bias_feature)).max(0.0))
            .sum();
        let primal = 0.5 * w2 + upper * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w2;
        stats.relative_gap = if primal > 0.0 {
            (primal - dual) / primal
        } else {
            0.0
        };
        if stats.relative_gap <= tol {
            return (w, wb * bias_feature, stats);
        }
    }
    log::warn!(
        "linear SVM stopped after {} epochs at relative duality gap {:.3e}",
        stats.epochs,
        stats.relative_gap
    );
    (w, wb * bias_feature, stats)
}

/// Same problem with a precomputed Gram matrix `gram[i][j] = x_i·x_j`; the
/// constant feature adds `bias_feature^2` to every entry. Returns the signed
/// dual coefficients `alpha_i y_i`.
pub fn solve_kernel(
    gram: &[Vec<f64>],
    y: &[f64],
    bias_feature: f64,
    c: f64,
    tol: f64,
    seed: u64,
) -> (Vec<f64>, SolveStats) {
    let n = gram.len();
    let upper = c / n as f64;
    let b2 = bias_feature * bias_feature;
    let q = |i: usize, j: usize| gram[i][j] + b2;
    let mut alpha = vec![0.0; n];
    // f[i] = sum_j alpha_j y_j q(i, j), the current decision value at example i.
    let mut f = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SolveStats {
        epochs: 0,
        relative_gap: f64::INFINITY,
    };
    while stats.epochs < MAX_EPOCHS {
        order.shuffle(&mut rng);
        for &i in &order {
            let qii = q(i, i);
            if qii <= 0.0 {
                continue;
            }
            let g = y[i] * f[i] - 1.0;
            let a = alpha[i];
            let next = (a - g / qii).clamp(0.0, upper);
            let delta = (next - a) * y[i];
            if delta != 0.0 {
                alpha[i] = next;
                for (k, fk) in f.iter_mut().enumerate() {
                    *fk += delta * q(k, i);
                }
            }
        }
        stats.epochs += 1;
        let w2: f64 = (0..n).map(|i| alpha[i] * y[i] * f[i]).sum();
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * f[i]).max(0.0)).sum();
        let primal = 0.5 * w2 + upper * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w2;
        stats.relative_gap = if primal > 0.0 {
            (primal - dual) / primal
        } else {
            0.0
        };
        if stats.relative_gap <= tol {
            break;
        }
    }
    (alpha.iter().zip(y).map(|(a, y)| a * y).collect(), stats)
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_points_are_separated() {
        let data: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0],
            vec![2.0, 1.5],
            vec![-1.0, -1.0],
            vec![-2.0, -0.5],
        ];
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let y = [1.0, 1.0, -1.0, -1.0];
        let (w, b, stats) = solve_linear(&rows, &y, 1.0, 100.0, 1e-8, 0);
        assert!(stats.relative_gap <= 1e-8);
        for (r, yi) in rows.iter().zip(y) {
            assert!(yi * (dot(&w, r) + b) > 0.0);
        }
    }

    #[test]
    fn kernel_solver_matches_linear_solver() {
        let data: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                vec![
                    (i as f64 * 0.7).sin(),
                    (i as f64 * 1.3).cos(),
                    i as f64 / 12.0,
                ]
            })
            .collect();
        let y: Vec<f64> = (0..12)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let (w, b, _) = solve_linear(&rows, &y, 0.5, 10.0, 1e-10, 1);
        let gram: Vec<Vec<f64>> = data
            .iter()
            .map(|a| data.iter().map(|c| dot(a, c)).collect())
            .collect();
        let (coef, _) = solve_kernel(&gram, &y, 0.5, 10.0, 1e-10, 1);
        for x in &data {
            let linear = dot(&w, x) + b;
            let kernel: f64 = coef
                .iter()
                .zip(&data)
                .map(|(a, xi)| a * (dot(xi, x) + 0.25))
                .sum();
            assert!((linear - kernel).abs() <= 1e-4, "{linear} vs {kernel}");
        }
    }
}
