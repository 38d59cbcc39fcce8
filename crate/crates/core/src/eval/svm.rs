//! Soft-margin SVM on L1-normalized histograms with the histogram
//! intersection kernel, trained in the dual by two-coordinate ascent.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::video::ScoreHistogram;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// `Σ min(aᵢ, bᵢ)`. Panics when lengths differ.
pub fn hik_kernel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "histograms must have the same bin count");
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

pub fn gram_matrix(hists: &[Vec<f64>]) -> Matrix {
    let n = hists.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = hik_kernel(&hists[i], &hists[j]);
            k.as_mut_slice()[i * n + j] = v;
            k.as_mut_slice()[j * n + i] = v;
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Dual solution for `min ½αᵀQα − Σα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`,
/// with `Q = yyᵀ ∘ K`. The decision function is `Σ αᵢyᵢK(xᵢ, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Maximal KKT violation at exit.
    pub violation: f64,
}

pub fn dual_objective(gram: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Maximal-violating-pair SMO on a precomputed Gram matrix; `y` is ±1.
pub fn solve_dual(gram: &Matrix, y: &[f64], opts: &SvmOptions) -> Result<DualSolution> {
    let n = y.len();
    if gram.shape() != (n, n) {
        return Err(Error::dims("solve_dual gram", n, gram.rows()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::InvalidArgument("training needs both classes".into()));
    }
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {}", opts.c)));
    }
    let c = opts.c;
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(i, j)];
    let mut alpha = vec![0.0; n];
    // G = Qα − e
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        let (mut i, mut m_up) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut m_low) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > m_up {
                (i, m_up) = (t, v);
            }
            if low(alpha[t], y[t]) && v < m_low {
                (j, m_low) = (t, v);
            }
        }
        let violation = (m_up - m_low).max(0.0);
        if i == usize::MAX || j == usize::MAX || violation < opts.tol {
            let bias = dual_bias(&alpha, &grad, y, c, m_up, m_low);
            return Ok(DualSolution {
                alpha,
                bias,
                iterations,
                violation,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged { iterations, violation });
        }
        iterations += 1;

        let curvature = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(1e-12);
        let mut step = (m_up - m_low) / curvature;
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });
        let di = y[i] * step;
        let dj = -y[j] * step;
        alpha[i] = (alpha[i] + di).clamp(0.0, c);
        alpha[j] = (alpha[j] + dj).clamp(0.0, c);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }
}

fn dual_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, m_up: f64, m_low: f64) -> f64 {
    let free: Vec<f64> = (0..alpha.len())
        .filter(|&t| alpha[t] > 0.0 && alpha[t] < c)
        .map(|t| -y[t] * grad[t])
        .collect();
    if free.is_empty() {
        let (lo, hi) = (m_low.min(m_up), m_low.max(m_up));
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HikSvmModel {
    /// L1-normalized support histograms.
    pub support: Vec<Vec<f64>>,
    /// `αᵢyᵢ`, each within `[-C, C]`.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl HikSvmModel {
    pub fn decision(&self, h: &ScoreHistogram) -> f64 {
        self.decision_normalized(&h.normalized())
    }

    pub fn decision_normalized(&self, h: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, a)| a * hik_kernel(s, h))
            .sum::<f64>()
            + self.bias
    }
}

pub fn hik_svm_train(histograms: &[ScoreHistogram], labels: &[bool], c: f64) -> Result<HikSvmModel> {
    hik_svm_train_with(histograms, labels, &SvmOptions { c, ..SvmOptions::default() })
}

pub fn hik_svm_train_with(histograms: &[ScoreHistogram], labels: &[bool], opts: &SvmOptions) -> Result<HikSvmModel> {
    if histograms.len() != labels.len() {
        return Err(Error::dims("hik_svm_train", histograms.len(), labels.len()));
    }
    let hists: Vec<Vec<f64>> = histograms.iter().map(ScoreHistogram::normalized).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let sol = solve_dual(&gram_matrix(&hists), &y, opts)?;
    let (mut support, mut coef) = (Vec::new(), Vec::new());
    for ((h, a), yt) in hists.into_iter().zip(&sol.alpha).zip(&y) {
        if *a > 0.0 {
            support.push(h);
            coef.push(a * yt);
        }
    }
    Ok(HikSvmModel {
        support,
        coef,
        bias: sol.bias,
        c: opts.c,
    })
}

/// `true` when the decision function is positive.
pub fn hik_svm_predict(model: &HikSvmModel, h: &ScoreHistogram) -> bool {
    model.decision(h) > 0.0
}
