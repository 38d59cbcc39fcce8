use super::{check_inputs, Embedded, LossOutput, NormalizationMode};
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, Matrix};

/// `log Σ exp(z)` and the softmax of `z`, computed stably.
pub(crate) fn log_softmax_parts(z: &[f64]) -> (f64, Vec<f64>) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let lse = max + sum.ln();
    (lse, exps.into_iter().map(|e| e / sum).collect())
}

/// Cross-entropy over a logit matrix. Returns the mean loss, `∂L/∂Z`
/// (already divided by the batch size) and the per-row softmax.
fn cross_entropy(z: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let m = z.rows();
    let mut grad = Matrix::zeros(m, z.cols());
    let mut per_sample = Vec::with_capacity(m);
    for (i, &y) in labels.iter().enumerate() {
        let (lse, p) = log_softmax_parts(z.row(i));
        per_sample.push(lse - z[(i, y)]);
        let g = grad.row_mut(i);
        for (gj, pj) in g.iter_mut().zip(&p) {
            *gj = pj / m as f64;
        }
        g[y] -= 1.0 / m as f64;
    }
    (pairwise_sum(&per_sample) / m as f64, grad)
}

/// Plain softmax cross-entropy on raw inner products `Wᵀf (+ b)`.
pub fn baseline_softmax(
    features: &Matrix,
    w: &Matrix,
    bias: Option<&[f64]>,
    labels: &[usize],
) -> Result<LossOutput> {
    check_inputs(features, w, labels)?;
    let mut z = features.matmul(w)?;
    if let Some(b) = bias {
        if b.len() != w.cols() {
            return Err(Error::dims("baseline_softmax bias", w.cols(), b.len()));
        }
        for i in 0..z.rows() {
            z.row_mut(i).iter_mut().zip(b).for_each(|(v, bj)| *v += bj);
        }
    }
    let (value, dz) = cross_entropy(&z, labels);
    let grad_features = dz.matmul_t(w)?;
    let grad_weights = features.t_matmul(&dz)?;
    let grad_bias = bias.map(|_| {
        (0..dz.cols())
            .map(|j| (0..dz.rows()).map(|i| dz[(i, j)]).sum())
            .collect()
    });
    Ok(LossOutput {
        value,
        grad_features,
        grad_weights,
        grad_bias,
        grad_scale: None,
    })
}

/// Softmax over `s · cos(fᵢ, Wⱼ)`.
///
/// With `learn_scale` the output also carries `∂L/∂s`.
pub fn scaled_cosine_softmax(
    features: &Matrix,
    agents: &Matrix,
    s: f64,
    learn_scale: bool,
    labels: &[usize],
    mode: NormalizationMode,
) -> Result<LossOutput> {
    check_inputs(features, agents, labels)?;
    let emb = Embedded::new(features, agents, mode);
    let cos = emb.similarities()?;
    let z = cos.scaled(s);
    let (value, dz) = cross_entropy(&z, labels);
    let grad_scale = learn_scale.then(|| {
        let terms: Vec<f64> = dz
            .as_slice()
            .iter()
            .zip(cos.as_slice())
            .map(|(g, c)| g * c)
            .collect();
        pairwise_sum(&terms)
    });
    let (grad_features, grad_weights) = emb.backward_similarity(&dz.scaled(s))?;
    Ok(LossOutput {
        value,
        grad_features,
        grad_weights,
        grad_bias: None,
        grad_scale,
    })
}

/// The same loss written with squared distances,
/// `−log softmax(−(s/2)‖f̃ᵢ − W̃ⱼ‖²)`. Value only; serves as an independent
/// check on [`scaled_cosine_softmax`].
pub fn euclidean_form_equivalence(
    features: &Matrix,
    agents: &Matrix,
    s: f64,
    labels: &[usize],
) -> Result<f64> {
    check_inputs(features, agents, labels)?;
    let emb = Embedded::new(features, agents, NormalizationMode::Both);
    let d2 = emb.squared_distances();
    let mut per_sample = Vec::with_capacity(labels.len());
    for (i, &y) in labels.iter().enumerate() {
        let z: Vec<f64> = d2.row(i).iter().map(|d| -0.5 * s * d).collect();
        let (lse, _) = log_softmax_parts(&z);
        per_sample.push(lse - z[y]);
    }
    Ok(pairwise_sum(&per_sample) / labels.len() as f64)
}
