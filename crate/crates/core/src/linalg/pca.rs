use super::{symmetric_eigen, Matrix};
use crate::error::{Error, Result};

/// Components whose variance falls below this fraction of the leading
/// variance are treated as absent.
const RANK_TOLERANCE: f64 = 1e-12;

/// Mean-centering followed by projection onto the leading covariance
/// eigenvectors. No whitening.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k x d`, one component per row.
    components: Matrix,
    variances: Vec<f64>,
    requested: usize,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// Fewer components than requested were available.
    pub fn is_degenerate(&self) -> bool {
        self.n_components() < self.requested
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::dims("pca_apply", self.mean.len(), x.len()));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self
            .components
            .row_iter()
            .map(|c| super::dot(c, &centered))
            .collect())
    }

    pub fn apply_rows(&self, data: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(data.rows(), self.n_components());
        for (i, r) in data.row_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&self.apply(r)?);
        }
        Ok(out)
    }

    /// Maps a projection back into input space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &zk) in self.components.row_iter().zip(z) {
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi += zk * ci;
            }
        }
        x
    }
}

pub fn pca_fit(data: &Matrix, keep: usize) -> Result<PcaModel> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca_fit needs at least 2 rows, got {n}"
        )));
    }
    if keep > d {
        return Err(Error::InvalidArgument(format!(
            "pca_fit keep = {keep} exceeds dimension {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in data.row_iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centered = data.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = centered.t_matmul(&centered)?;
    cov.scale(1.0 / (n - 1) as f64);

    let eig = symmetric_eigen(&cov)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let available = eig
        .values
        .iter()
        .take_while(|&&v| top > 0.0 && v > RANK_TOLERANCE * top)
        .count();
    let k = keep.min(available);
    let components = Matrix::from_fn(k, d, |c, j| eig.vectors[(j, c)]);
    Ok(PcaModel {
        mean,
        components,
        variances: eig.values[..k].to_vec(),
        requested: keep,
    })
}

pub fn pca_apply(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    model.apply(x)
}
