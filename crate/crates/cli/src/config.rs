//! TOML run configuration. Every section is optional and unknown keys are
//! rejected; omitted values fall back to the library defaults.

use std::path::{Path, PathBuf};

use hyperembed::eval::SvmOptions;
use hyperembed::losses::{DEFAULT_COMBO_WEIGHT, DEFAULT_FIXED_SCALE, DEFAULT_LEARNED_SCALE};
use hyperembed::trainer::TrainConfig;
use hyperembed::{LossConfig, LossKind, MetricLoss, NormalizationMode, Scale};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub video: VideoSection,
    #[serde(default)]
    pub bounds: BoundsSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "lowercase")]
pub enum DataSection {
    Blobs {
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_per_class")]
        per_class: usize,
        #[serde(default = "default_input_dim")]
        dim: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    Mnist { images: PathBuf, labels: PathBuf },
}

fn default_classes() -> usize {
    10
}
fn default_per_class() -> usize {
    100
}
fn default_input_dim() -> usize {
    16
}
fn default_spread() -> f64 {
    0.2
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection::Blobs {
            classes: default_classes(),
            per_class: default_per_class(),
            dim: default_input_dim(),
            spread: default_spread(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            feature_dim: 16,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub kind: Option<String>,
    /// Initial (learned) or constant (fixed) scale.
    pub scale: Option<f64>,
    pub learn_scale: Option<bool>,
    pub margin: Option<f64>,
    pub combo_weight: Option<f64>,
    pub bias: Option<bool>,
    pub normalization: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
    pub iterations: Option<usize>,
    pub snapshot_every: Option<usize>,
    pub snapshot_count: Option<usize>,
    pub pretrain_iterations: Option<usize>,
    pub tracker_decay: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub features: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub folds: Option<usize>,
    /// Retained PCA dimension; defaults to the full feature dimension, 0 disables.
    pub pca: Option<usize>,
    pub far: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSection {
    /// Feature store with one `frames x d` entry per video id.
    pub videos: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    /// Number of simulated pairs when no files are given.
    pub synthetic_pairs: Option<usize>,
    pub folds: Option<usize>,
    pub c: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub n: Option<Vec<usize>>,
    pub ell_sq: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        // relative data paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(cfg.rebase(base))
    }

    fn rebase(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSection::Mnist { images, labels } = &mut self.data {
            fix(images);
            fix(labels);
        }
        for p in [
            &mut self.eval.features,
            &mut self.eval.pairs,
            &mut self.video.videos,
            &mut self.video.pairs,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self
    }

    pub fn loss_config(&self) -> Result<LossConfig, String> {
        let s = &self.loss;
        let kind = match s.kind.as_deref().unwrap_or("scaled_cosine_softmax") {
            "baseline_softmax" => LossKind::BaselineSoftmax,
            "scaled_cosine_softmax" => LossKind::ScaledCosineSoftmax,
            "c_contrastive" => LossKind::CContrastive,
            "c_triplet" => LossKind::CTriplet,
            "c_triplet_center" => LossKind::CTripletCenter,
            "softmax+c_contrastive" => LossKind::Combination(MetricLoss::Contrastive),
            "softmax+c_triplet" => LossKind::Combination(MetricLoss::Triplet),
            "softmax+c_triplet_center" => LossKind::Combination(MetricLoss::TripletCenter),
            other => return Err(format!("loss.kind: unknown loss '{other}'")),
        };
        let learned = s.learn_scale.unwrap_or(true);
        let scale = match (learned, s.scale) {
            (true, v) => Scale::Learned(v.unwrap_or(DEFAULT_LEARNED_SCALE)),
            (false, v) => Scale::Fixed(v.unwrap_or(DEFAULT_FIXED_SCALE)),
        };
        if !(scale.initial() > 0.0 && scale.initial().is_finite()) {
            return Err(format!("loss.scale must be > 0, got {}", scale.initial()));
        }
        let normalization = match s.normalization.as_deref().unwrap_or("both") {
            "both" => NormalizationMode::Both,
            "features" => NormalizationMode::FeaturesOnly,
            "weights" => NormalizationMode::WeightsOnly,
            other => return Err(format!("loss.normalization: expected both, features or weights, got '{other}'")),
        };
        let mut cfg = LossConfig::new(kind)
            .with_scale(scale)
            .with_combo_weight(s.combo_weight.unwrap_or(DEFAULT_COMBO_WEIGHT))
            .with_bias(s.bias.unwrap_or(false))
            .with_normalization(normalization);
        if let Some(m) = s.margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(format!("loss.margin must be >= 0, got {m}"));
            }
            cfg = cfg.with_margin(m);
        }
        Ok(cfg)
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, String> {
        let t = &self.train;
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            loss: self.loss_config()?,
            lr: t.lr.unwrap_or(d.lr),
            momentum: t.momentum.unwrap_or(d.momentum),
            weight_decay: t.weight_decay.unwrap_or(d.weight_decay),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            iterations: t.iterations.unwrap_or(d.iterations),
            seed,
            snapshot_every: t.snapshot_every.unwrap_or(d.snapshot_every),
            snapshot_count: t.snapshot_count.unwrap_or(d.snapshot_count),
            pretrain_iterations: t.pretrain_iterations.unwrap_or(d.pretrain_iterations),
            tracker_decay: t.tracker_decay.unwrap_or(d.tracker_decay),
        };
        cfg.validate().map_err(|e| format!("train: {e}"))?;
        Ok(cfg)
    }

    pub fn svm_options(&self) -> SvmOptions {
        let d = SvmOptions::default();
        SvmOptions {
            c: self.video.c.unwrap_or(d.c),
            tol: self.video.tol.unwrap_or(d.tol),
            max_iter: self.video.max_iter.unwrap_or(d.max_iter),
        }
    }
}
