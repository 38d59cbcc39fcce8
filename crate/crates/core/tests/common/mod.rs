//! Brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use hyperembed::eval::dual_objective;
use hyperembed::Matrix;

/// Fold accuracies from an exhaustive sweep: every candidate threshold is
/// scored by a full pass over the training folds.
pub fn brute_force_kfold(scores: &[f64], labels: &[bool], k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|fold| {
            let train: Vec<usize> = (0..scores.len()).filter(|i| i % k != fold).collect();
            let test: Vec<usize> = (0..scores.len()).filter(|i| i % k == fold).collect();
            let mut distinct: Vec<f64> = train.iter().map(|&i| scores[i]).collect();
            distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distinct.dedup();
            let mut cands = vec![distinct[0] - 1.0];
            for w in distinct.windows(2) {
                cands.push((w[0] + w[1]) / 2.0);
            }
            cands.push(distinct[distinct.len() - 1] + 1.0);
            let acc = |idx: &[usize], t: f64| {
                idx.iter().filter(|&&i| (scores[i] > t) == labels[i]).count() as f64 / idx.len() as f64
            };
            let mut best_t = cands[0];
            let mut best = acc(&train, best_t);
            for &t in &cands[1..] {
                let a = acc(&train, t);
                if a > best {
                    best = a;
                    best_t = t;
                }
            }
            (best_t, acc(&test, best_t))
        })
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when a pivot falls below `1e-12`.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Global minimum of the SVM dual by enumerating every assignment of each
/// coefficient to {0, free, C} and solving the stationarity system of the
/// free ones. Returns the minimal objective among feasible candidates.
pub fn brute_force_dual(gram: &Matrix, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    assert!(n <= 8);
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(i, j)];
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&t| state[t] == 1).collect();
        let upper: Vec<usize> = (0..n).filter(|&t| state[t] == 2).collect();
        let mut alpha = vec![0.0; n];
        for &u in &upper {
            alpha[u] = c;
        }
        if free.is_empty() {
            let bal: f64 = upper.iter().map(|&u| y[u] * c).sum();
            if bal.abs() > 1e-12 {
                continue;
            }
        } else {
            // unknowns: α_free then the multiplier b
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &t) in free.iter().enumerate() {
                for (col, &s) in free.iter().enumerate() {
                    a[r][col] = q(t, s);
                }
                a[r][m] = y[t];
                rhs[r] = 1.0 - upper.iter().map(|&u| q(t, u) * c).sum::<f64>();
            }
            for (col, &s) in free.iter().enumerate() {
                a[m][col] = y[s];
            }
            rhs[m] = -upper.iter().map(|&u| y[u] * c).sum::<f64>();
            let Some(x) = solve(a, rhs) else { continue };
            if free.iter().enumerate().any(|(i, _)| x[i] < -1e-9 || x[i] > c + 1e-9) {
                continue;
            }
            for (i, &t) in free.iter().enumerate() {
                alpha[t] = x[i].clamp(0.0, c);
            }
        }
        best = best.min(dual_objective(gram, y, &alpha));
    }
    best
}
