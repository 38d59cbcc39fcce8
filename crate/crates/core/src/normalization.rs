//! L2 normalization onto the unit hypersphere and its exact backward rule.
//!
//! Forward: `x̃ = x / ‖x‖` with `‖x‖ = sqrt(Σ xᵢ² + ε)`.
//! Backward: `∂L/∂x = (g − x̃ ⟨g, x̃⟩) / ‖x‖` where `g = ∂L/∂x̃`, i.e. the
//! upstream gradient projected onto the tangent space at `x̃` and divided by
//! the norm. The result is orthogonal to `x`, so a plain gradient step can
//! only grow `‖x‖`.
//!
//! Features are normalized per row and agent weights per column; both go
//! through the same vector routines.

use crate::linalg::{dot, l2_norm, Matrix};

/// Everything the backward pass needs from the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormContext {
    pub input: Vec<f64>,
    pub norm: f64,
    pub output: Vec<f64>,
}

pub fn normalize_forward(x: &[f64]) -> NormContext {
    let norm = l2_norm(x);
    NormContext {
        input: x.to_vec(),
        norm,
        output: x.iter().map(|v| v / norm).collect(),
    }
}

pub fn normalize_backward(ctx: &NormContext, grad_out: &[f64]) -> Vec<f64> {
    project_tangent(&ctx.output, ctx.norm, grad_out)
}

#[inline]
fn project_tangent(unit: &[f64], norm: f64, g: &[f64]) -> Vec<f64> {
    debug_assert_eq!(unit.len(), g.len());
    let radial = dot(g, unit);
    g.iter()
        .zip(unit)
        .map(|(gi, ui)| (gi - ui * radial) / norm)
        .collect()
}

/// Row-wise normalization of a batch. Keeps the norms for [`RowNorm::backward`].
#[derive(Debug, Clone)]
pub struct RowNorm {
    pub output: Matrix,
    pub norms: Vec<f64>,
}

impl RowNorm {
    pub fn forward(x: &Matrix) -> Self {
        let mut output = x.clone();
        let mut norms = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let n = l2_norm(x.row(i));
            output.row_mut(i).iter_mut().for_each(|v| *v /= n);
            norms.push(n);
        }
        Self { output, norms }
    }

    pub fn backward(&self, grad_out: &Matrix) -> Matrix {
        assert_eq!(grad_out.shape(), self.output.shape());
        let mut g = Matrix::zeros(grad_out.rows(), grad_out.cols());
        for i in 0..grad_out.rows() {
            let p = project_tangent(self.output.row(i), self.norms[i], grad_out.row(i));
            g.row_mut(i).copy_from_slice(&p);
        }
        g
    }
}

/// Column-wise normalization, used for the `d x n` agent matrix.
#[derive(Debug, Clone)]
pub struct ColNorm {
    pub output: Matrix,
    pub norms: Vec<f64>,
}

impl ColNorm {
    pub fn forward(w: &Matrix) -> Self {
        let t = RowNorm::forward(&w.transpose());
        Self {
            output: t.output.transpose(),
            norms: t.norms,
        }
    }

    pub fn backward(&self, grad_out: &Matrix) -> Matrix {
        let t = RowNorm {
            output: self.output.transpose(),
            norms: self.norms.clone(),
        };
        t.backward(&grad_out.transpose()).transpose()
    }
}
