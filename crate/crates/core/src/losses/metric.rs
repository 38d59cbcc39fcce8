//! Contrastive and triplet losses with one side of every pair replaced by a
//! class agent, so the batch needs no pair or triplet sampling.
//!
//! All three average the per-sample sums over the batch. Hinges at exactly
//! zero take the inactive side.

use super::{check_inputs, Embedded, LossOutput, MetricLoss, NormalizationMode};
use crate::error::Result;
use crate::linalg::{pairwise_sum, Matrix};

/// `‖f̃ᵢ − W̃_{yᵢ}‖² + Σ_{j≠yᵢ} max(0, m − ‖f̃ᵢ − W̃ⱼ‖²)`, batch-averaged.
pub fn c_contrastive(
    features: &Matrix,
    agents: &Matrix,
    labels: &[usize],
    margin: f64,
    mode: NormalizationMode,
) -> Result<LossOutput> {
    check_inputs(features, agents, labels)?;
    let emb = Embedded::new(features, agents, mode);
    let d2 = emb.squared_distances();
    let (m, n) = d2.shape();
    let inv = 1.0 / m as f64;
    let mut dd = Matrix::zeros(m, n);
    let mut per_sample = Vec::with_capacity(m);
    for (i, &y) in labels.iter().enumerate() {
        let mut li = d2[(i, y)];
        dd[(i, y)] = inv;
        for j in (0..n).filter(|&j| j != y) {
            let h = margin - d2[(i, j)];
            if h > 0.0 {
                li += h;
                dd[(i, j)] = -inv;
            }
        }
        per_sample.push(li);
    }
    finish(&emb, per_sample, &dd)
}

/// `Σ_{k≠yᵢ} max(0, m + ‖f̃ᵢ − W̃_{yᵢ}‖² − ‖f̃ᵢ − W̃ₖ‖²)`, batch-averaged.
pub fn c_triplet(
    features: &Matrix,
    agents: &Matrix,
    labels: &[usize],
    margin: f64,
    mode: NormalizationMode,
) -> Result<LossOutput> {
    triplet_impl(features, agents, labels, margin, mode, false)
}

/// [`c_triplet`] plus the intra-class distance, applied whether or not the
/// hinge is active.
pub fn c_triplet_center(
    features: &Matrix,
    agents: &Matrix,
    labels: &[usize],
    margin: f64,
    mode: NormalizationMode,
) -> Result<LossOutput> {
    triplet_impl(features, agents, labels, margin, mode, true)
}

fn triplet_impl(
    features: &Matrix,
    agents: &Matrix,
    labels: &[usize],
    margin: f64,
    mode: NormalizationMode,
    center: bool,
) -> Result<LossOutput> {
    check_inputs(features, agents, labels)?;
    let emb = Embedded::new(features, agents, mode);
    let d2 = emb.squared_distances();
    let (m, n) = d2.shape();
    let inv = 1.0 / m as f64;
    let mut dd = Matrix::zeros(m, n);
    let mut per_sample = Vec::with_capacity(m);
    for (i, &y) in labels.iter().enumerate() {
        let pos = d2[(i, y)];
        let mut li = 0.0;
        if center {
            li += pos;
            dd[(i, y)] += inv;
        }
        for k in (0..n).filter(|&k| k != y) {
            let h = margin + pos - d2[(i, k)];
            if h > 0.0 {
                li += h;
                dd[(i, y)] += inv;
                dd[(i, k)] -= inv;
            }
        }
        per_sample.push(li);
    }
    finish(&emb, per_sample, &dd)
}

fn finish(emb: &Embedded, per_sample: Vec<f64>, dd: &Matrix) -> Result<LossOutput> {
    let value = pairwise_sum(&per_sample) / per_sample.len() as f64;
    let (grad_features, grad_weights) = emb.backward_distance(dd)?;
    Ok(LossOutput {
        value,
        grad_features,
        grad_weights,
        grad_bias: None,
        grad_scale: None,
    })
}

/// Every hinge argument the metric loss evaluates, for keeping
/// finite-difference probes away from the kinks.
pub fn hinge_arguments(
    features: &Matrix,
    agents: &Matrix,
    labels: &[usize],
    loss: MetricLoss,
    margin: f64,
    mode: NormalizationMode,
) -> Result<Vec<f64>> {
    check_inputs(features, agents, labels)?;
    let d2 = Embedded::new(features, agents, mode).squared_distances();
    let n = d2.cols();
    let mut out = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        for j in (0..n).filter(|&j| j != y) {
            out.push(match loss {
                MetricLoss::Contrastive => margin - d2[(i, j)],
                MetricLoss::Triplet | MetricLoss::TripletCenter => margin + d2[(i, y)] - d2[(i, j)],
            });
        }
    }
    Ok(out)
}
