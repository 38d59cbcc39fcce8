//! Numeric checks of the geometric claims behind normalized training:
//! feature scaling under plain softmax, the loss floor after normalization,
//! and the distortion introduced by class agents.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Matrix, Rng};
use crate::losses::{scaled_cosine_softmax, NormalizationMode};
use crate::normalization::normalize_forward;

/// Softmax probability of class `i` for logits `Wᵀ(s·f)`.
fn class_probability(w: &Matrix, f: &[f64], s: f64, i: usize) -> f64 {
    let z: Vec<f64> = (0..w.cols())
        .map(|j| s * (0..w.rows()).map(|k| w[(k, j)] * f[k]).sum::<f64>())
        .collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = z.iter().map(|v| (v - max).exp()).sum();
    (z[i] - max).exp() / denom
}

/// For the bias-free softmax with `i = argmaxⱼ Wⱼᵀf`, checks that scaling the
/// feature by `s > 1` never lowers `Pᵢ`. `w` is `d x n`.
pub fn prop1_check(w: &Matrix, f: &[f64], s: f64) -> Result<bool> {
    if w.rows() != f.len() {
        return Err(Error::dims("prop1_check", w.rows(), f.len()));
    }
    if !(s > 1.0) {
        return Err(Error::InvalidArgument(format!("scale must exceed 1, got {s}")));
    }
    let logits: Vec<f64> = (0..w.cols()).map(|j| dot(&w.col(j), f)).collect();
    let i = logits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("no classes".into()))?;
    Ok(class_probability(w, f, s, i) >= class_probability(w, f, 1.0, i) - 1e-12)
}

/// Lower bound on the softmax loss when features and agents all have squared
/// norm `ell_sq`: `log(1 + (n−1)·exp(−n/(n−1)·ℓ²))`.
pub fn prop2_bound(n: usize, ell_sq: f64) -> f64 {
    assert!(n >= 2, "need at least two classes");
    let n = n as f64;
    ((n - 1.0) * (-(n / (n - 1.0)) * ell_sq).exp()).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Bound {
    pub n: usize,
    pub ell_sq: f64,
    pub bound: f64,
}

impl Prop2Bound {
    pub fn new(n: usize, ell_sq: f64) -> Self {
        Self {
            n,
            ell_sq,
            bound: prop2_bound(n, ell_sq),
        }
    }
}

/// Bound values over a grid of `(n, ℓ²)`.
pub fn bound_curve(ns: &[usize], ell_sq: &[f64]) -> Vec<Prop2Bound> {
    ns.iter()
        .flat_map(|&n| ell_sq.iter().map(move |&l| Prop2Bound::new(n, l)))
        .collect()
}

pub fn write_bound_curve(path: &Path, points: &[Prop2Bound]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ell_sq", "n", "bound"])?;
    for p in points {
        w.write_record([p.ell_sq.to_string(), p.n.to_string(), p.bound.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `n` unit vectors in `R^d` with pairwise inner product `−1/(n−1)`.
/// Requires `n ≤ d + 1`.
pub fn regular_simplex(d: usize, n: usize) -> Result<Matrix> {
    if n < 2 || n > d + 1 {
        return Err(Error::InvalidArgument(format!(
            "a regular simplex with {n} vertices needs 2 <= n <= d+1 (d = {d})"
        )));
    }
    // centered standard basis of R^n spans an (n−1)-dim subspace; express it
    // in an orthonormal basis of that subspace (Gram-Schmidt), then pad to d
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| if k == i { 1.0 } else { 0.0 } - 1.0 / n as f64)
                .collect()
        })
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in centered.iter().take(n - 1) {
        let mut u = v.clone();
        for b in &basis {
            let p = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&u, &u).sqrt();
        basis.push(u.into_iter().map(|x| x / norm).collect());
    }
    let mut w = Matrix::zeros(d, n);
    for (j, v) in centered.iter().enumerate() {
        let coords: Vec<f64> = basis.iter().map(|b| dot(v, b)).collect();
        let norm = dot(&coords, &coords).sqrt();
        for (k, c) in coords.into_iter().enumerate() {
            w[(k, j)] = c / norm;
        }
    }
    Ok(w)
}

/// Softmax loss at scale `ell_sq` when every class's feature coincides with
/// its agent (one sample per class). `w` is `d x n`.
pub fn well_separated_loss(w: &Matrix, ell_sq: f64) -> Result<f64> {
    let labels: Vec<usize> = (0..w.cols()).collect();
    Ok(scaled_cosine_softmax(&w.transpose(), w, ell_sq, false, &labels, NormalizationMode::Both)?.value)
}

#[derive(Debug, Clone)]
pub struct GapOptions {
    pub seed: u64,
    pub max_iters: usize,
    pub learning_rate: f64,
    /// Stop once the tangent gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iters: 20_000,
            learning_rate: 0.5,
            grad_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub achieved: f64,
    pub bound: f64,
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final agent configuration, `d x n`, unit columns.
    pub agents: Matrix,
}

/// Builds the well-separated configuration (features equal to agents) and
/// reports how far its loss sits above the bound. With `n ≤ d + 1` the
/// regular simplex is used directly; otherwise the agents are optimized by
/// gradient descent on the sphere.
pub fn prop2_empirical_gap(d: usize, n: usize, ell_sq: f64, opts: &GapOptions) -> Result<GapReport> {
    if n < 2 || d == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 2 and d >= 1 (n = {n}, d = {d})")));
    }
    let bound = prop2_bound(n, ell_sq);
    if n <= d + 1 {
        let agents = regular_simplex(d, n)?;
        let achieved = well_separated_loss(&agents, ell_sq)?;
        return Ok(GapReport {
            achieved,
            bound,
            gap: achieved - bound,
            converged: true,
            iterations: 0,
            agents,
        });
    }

    let mut rng = Rng::new(opts.seed);
    let mut w = crate::normalization::ColNorm::forward(&rng.normal_matrix(d, n, 1.0)).output;
    let labels: Vec<usize> = (0..n).collect();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iters {
        iterations = it + 1;
        let out = scaled_cosine_softmax(&w.transpose(), &w, ell_sq, false, &labels, NormalizationMode::Both)?;
        let mut g = out.grad_weights;
        g.axpy(1.0, &out.grad_features.transpose());
        if g.frobenius_norm() < opts.grad_tol {
            converged = true;
            break;
        }
        w.axpy(-opts.learning_rate, &g);
        // retract onto the sphere
        w = crate::normalization::ColNorm::forward(&w).output;
    }
    let achieved = well_separated_loss(&w, ell_sq)?;
    Ok(GapReport {
        achieved,
        bound,
        gap: achieved - bound,
        converged,
        iterations,
        agents: w,
    })
}

/// Normalized Euclidean distance `‖x̃ − ỹ‖`.
pub fn normalized_distance(a: &[f64], b: &[f64]) -> f64 {
    let a = normalize_forward(a).output;
    let b = normalize_forward(b).output;
    squared_distance(&a, &b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    /// `mean_j (d(f₀, fⱼ) − d(f₀, W))²`
    pub distortion: f64,
    /// `mean_j d(fⱼ, W)²`
    pub bound: f64,
}

/// Error from standing in for every member of `cluster` (rows) with `agent`
/// when measuring distances from `f0`.
pub fn prop3_distortion(f0: &[f64], cluster: &Matrix, agent: &[f64]) -> Result<Distortion> {
    if cluster.rows() == 0 {
        return Err(Error::InvalidArgument("empty cluster".into()));
    }
    if cluster.cols() != f0.len() || agent.len() != f0.len() {
        return Err(Error::dims("prop3_distortion", f0.len(), format!("{} / {}", cluster.cols(), agent.len())));
    }
    let to_agent = normalized_distance(f0, agent);
    let (mut distortion, mut bound) = (0.0, 0.0);
    for fj in cluster.row_iter() {
        let diff = normalized_distance(f0, fj) - to_agent;
        distortion += diff * diff;
        bound += normalized_distance(fj, agent).powi(2);
    }
    let k = cluster.rows() as f64;
    Ok(Distortion {
        distortion: distortion / k,
        bound: bound / k,
    })
}

/// Batch estimate of the distortion bound: mean over samples of
/// `‖f̃ᵢ − W̃_{yᵢ}‖²`. `agents` is `d x n`.
pub fn agent_distortion_bound(features: &Matrix, agents: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| normalized_distance(features.row(i), &agents.col(y)).powi(2))
        .sum();
    total / labels.len() as f64
}

pub const DEFAULT_TRACKER_DECAY: f64 = 0.99;

/// Exponential moving average of the distortion bound, for display during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionTracker {
    pub ema: f64,
    pub decay: f64,
}

impl Default for DistortionTracker {
    fn default() -> Self {
        Self::new(DEFAULT_TRACKER_DECAY)
    }
}

impl DistortionTracker {
    pub fn new(decay: f64) -> Self {
        assert!(decay > 0.0 && decay < 1.0, "decay must lie in (0, 1)");
        Self { ema: 0.0, decay }
    }

    pub fn update(&mut self, value: f64) {
        *self = tracker_update(*self, value);
    }
}

pub fn tracker_update(t: DistortionTracker, value: f64) -> DistortionTracker {
    debug_assert!(value >= 0.0);
    DistortionTracker {
        ema: t.decay * t.ema + (1.0 - t.decay) * value,
        decay: t.decay,
    }
}

/// Probability of the correct class when its cosine is `+1` and all `n − 1`
/// others are `−1`, at scale `s`.
pub fn extreme_case_probability(n: usize, s: f64) -> f64 {
    let e = s.exp();
    e / (e + (n as f64 - 1.0) / e)
}
