//! Hypersphere embedding training and evaluation.
//!
//! * [`normalization`]: the L2 normalization layer and its backward rule.
//! * [`losses`]: scaled-cosine softmax and agent-based contrastive/triplet
//!   losses with exact gradients.
//! * [`theory`]: numeric checks of the scaling, loss-floor and agent
//!   distortion results.
//! * [`trainer`]: a small MLP, SGD with momentum and the toy experiments.
//! * [`eval`]: pair verification, TPR@FAR and video score histograms with a
//!   histogram-intersection SVM.

pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod linalg;
pub mod losses;
pub mod normalization;
pub mod store;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};
pub use losses::{AgentMatrix, LossConfig, LossKind, LossOutput, MetricLoss, NormalizationMode, Scale};
