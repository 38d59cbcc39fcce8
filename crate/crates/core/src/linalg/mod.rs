//! Dense linear algebra, PCA and the seeded RNG used by everything else.

mod eigen;
mod matrix;
mod pca;
mod rng;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::{dot, pairwise_sum, squared_distance, Matrix};
pub use pca::{pca_apply, pca_fit, PcaModel};
pub use rng::Rng;

/// Stabilizer inside every L2 norm: `‖v‖ = sqrt(Σ vᵢ² + EPS)`.
pub const EPS: f64 = 1e-12;

/// `sqrt(Σ vᵢ² + EPS)`.
pub fn l2_norm(v: &[f64]) -> f64 {
    l2_norm_with(v, EPS)
}

pub fn l2_norm_with(v: &[f64], eps: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() + eps).sqrt()
}
