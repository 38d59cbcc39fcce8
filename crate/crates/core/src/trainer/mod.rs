//! Desk-scale training harness: an MLP embedding net, momentum SGD, data
//! loaders and exports for the toy experiments.

mod data;
mod export;
mod net;
mod sgd;

use std::path::Path;

pub use data::{
    encode_idx, load_mnist_idx, make_blobs, parse_idx_images, parse_idx_labels, DataSource, Dataset,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use export::{
    export_feature_scatter, near_origin_classes, radialness, write_features_csv, write_loss_curve,
    PATHOLOGY_RATIO,
};
pub use net::{EmbeddingNet, ForwardCache, Layer, LayerGrad};
pub use sgd::{ParamGroup, Sgd};
pub(crate) use export::csv_writer;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::losses::{LossConfig, LossKind};
use crate::store::Bundle;
use crate::theory::{agent_distortion_bound, DistortionTracker, DEFAULT_TRACKER_DECAY};

pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_WEIGHT_DECAY: f64 = 5e-4;
pub const DEFAULT_BATCH_SIZE: usize = 256;
pub const DEFAULT_SNAPSHOT_EVERY: usize = 1000;
pub const DEFAULT_SNAPSHOT_COUNT: usize = 5;
/// Learned scales are kept at or above this.
pub const MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub snapshot_every: usize,
    pub snapshot_count: usize,
    /// Leading iterations trained with the plain softmax before switching
    /// to `loss`.
    pub pretrain_iterations: usize,
    pub tracker_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            lr: DEFAULT_LR,
            momentum: DEFAULT_MOMENTUM,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            batch_size: DEFAULT_BATCH_SIZE,
            iterations: 2000,
            seed: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            snapshot_count: DEFAULT_SNAPSHOT_COUNT,
            pretrain_iterations: 0,
            tracker_decay: DEFAULT_TRACKER_DECAY,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be >= 1".into());
        }
        if !(self.tracker_decay > 0.0 && self.tracker_decay < 1.0) {
            return bad(format!("tracker_decay must lie in (0, 1), got {}", self.tracker_decay));
        }
        if self.pretrain_iterations > self.iterations {
            return bad("pretrain_iterations exceeds iterations".into());
        }
        self.loss.validate()
    }
}

/// Everything training updates: the net, the class agents (`d x n`), the
/// optional class bias and the scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: EmbeddingNet,
    pub agents: Matrix,
    pub bias: Option<Vec<f64>>,
    pub scale: f64,
}

impl Model {
    pub fn new(net: EmbeddingNet, classes: usize, loss: &LossConfig, rng: &mut Rng) -> Self {
        let d = net.feature_dim();
        let agents = rng.normal_matrix(d, classes, 1.0 / (d as f64).sqrt());
        Self {
            net,
            agents,
            bias: loss.use_bias.then(|| vec![0.0; classes]),
            scale: loss.scale.initial(),
        }
    }

    pub fn classes(&self) -> usize {
        self.agents.cols()
    }

    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        self.net.embed(x)
    }

    pub fn logits(&self, x: &Matrix, loss: &LossConfig) -> Result<Matrix> {
        let f = self.embed(x)?;
        loss.logits(&f, &self.agents, self.bias.as_deref())
    }

    pub fn predict(&self, x: &Matrix, loss: &LossConfig) -> Result<Vec<usize>> {
        let z = self.logits(x, loss)?;
        Ok(z.row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0
            })
            .collect())
    }

    pub fn accuracy(&self, data: &Dataset, loss: &LossConfig) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(&data.samples, loss)?;
        let hits = pred.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / data.len() as f64)
    }

    pub fn to_bundle(&self) -> Bundle {
        let mut b = Bundle::new();
        for (l, layer) in self.net.layers().iter().enumerate() {
            b.push(format!("layer{l}.weights"), layer.weights.clone());
            if let Some(bias) = &layer.bias {
                b.push(format!("layer{l}.bias"), Matrix::from_vec(1, bias.len(), bias.clone()).unwrap());
            }
        }
        b.push("agents", self.agents.clone());
        if let Some(bias) = &self.bias {
            b.push("class_bias", Matrix::from_vec(1, bias.len(), bias.clone()).unwrap());
        }
        b.push("scale", Matrix::from_vec(1, 1, vec![self.scale]).unwrap());
        b
    }

    pub fn from_bundle(b: &Bundle, path: &Path) -> Result<Self> {
        let missing = |field: &'static str| Error::Format {
            path: path.into(),
            field,
            detail: "entry missing".into(),
        };
        let mut layers = Vec::new();
        while let Some(w) = b.get(&format!("layer{}.weights", layers.len())) {
            let bias = b
                .get(&format!("layer{}.bias", layers.len()))
                .map(|m| m.as_slice().to_vec());
            layers.push(Layer { weights: w.clone(), bias });
        }
        if layers.is_empty() {
            return Err(missing("layer0.weights"));
        }
        let net = EmbeddingNet::from_layers(layers)?;
        let agents = b.get("agents").ok_or_else(|| missing("agents"))?.clone();
        if agents.rows() != net.feature_dim() {
            return Err(Error::Format {
                path: path.into(),
                field: "agents",
                detail: format!("{} rows for feature dim {}", agents.rows(), net.feature_dim()),
            });
        }
        let bias = b.get("class_bias").map(|m| m.as_slice().to_vec());
        let scale = b.get("scale").ok_or_else(|| missing("scale"))?.as_slice()[0];
        Ok(Self { net, agents, bias, scale })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_bundle().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bundle(&Bundle::load(path)?, path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Number of completed iterations when the snapshot was taken.
    pub iteration: usize,
    pub model: Model,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch loss before each update.
    pub loss_curve: Vec<f64>,
    pub model: Model,
    /// The most recent `snapshot_count` snapshots, oldest first.
    pub snapshots: Vec<Snapshot>,
    /// Final moving average of the agent distortion bound.
    pub distortion: f64,
}

/// Trains `net` on `data`. Fully deterministic given `cfg.seed`.
pub fn train(net: EmbeddingNet, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    if data.input_dim() != net.input_dim() {
        return Err(Error::dims("train input", net.input_dim(), data.input_dim()));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut model = Model::new(net, data.classes, &cfg.loss, &mut rng);
    let pretrain = LossConfig::new(LossKind::BaselineSoftmax).with_bias(cfg.loss.use_bias);
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, cfg.weight_decay);
    let mut tracker = DistortionTracker::new(cfg.tracker_decay);
    let mut batches = Batcher::new(data.len(), cfg.batch_size);
    let full = Batch::full(data);

    let mut loss_curve = Vec::with_capacity(cfg.iterations);
    let mut snapshots = Vec::new();
    for it in 0..cfg.iterations {
        let loss = if it < cfg.pretrain_iterations { &pretrain } else { &cfg.loss };
        let owned;
        let batch = match batches.next(&mut rng) {
            None => &full,
            Some(idx) => {
                owned = Batch::select(data, &idx);
                &owned
            }
        };
        let value = step(&mut model, &mut opt, loss, batch, &mut tracker)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { iteration: it, loss: f64::NAN },
                other => other,
            })
            .and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Diverged { iteration: it, loss: v })
                }
            })?;
        loss_curve.push(value);
        if cfg.snapshot_count > 0 && (it + 1) % cfg.snapshot_every == 0 {
            if snapshots.len() == cfg.snapshot_count {
                snapshots.remove(0);
            }
            snapshots.push(Snapshot {
                iteration: it + 1,
                model: model.clone(),
            });
        }
    }
    Ok(TrainReport {
        loss_curve,
        model,
        snapshots,
        distortion: tracker.ema,
    })
}

/// Mean of `metric` over the snapshots, the protocol of scoring each saved
/// snapshot separately and averaging.
pub fn snapshot_average(snapshots: &[Snapshot], mut metric: impl FnMut(&Model) -> Result<f64>) -> Result<f64> {
    if snapshots.is_empty() {
        return Err(Error::InvalidArgument("no snapshots to average".into()));
    }
    let mut total = 0.0;
    for s in snapshots {
        total += metric(&s.model)?;
    }
    Ok(total / snapshots.len() as f64)
}

struct Batch {
    x: Matrix,
    y: Vec<usize>,
}

impl Batch {
    fn full(data: &Dataset) -> Self {
        Self {
            x: data.samples.clone(),
            y: data.labels.clone(),
        }
    }

    fn select(data: &Dataset, idx: &[usize]) -> Self {
        Self {
            x: data.samples.select_rows(idx),
            y: idx.iter().map(|&i| data.labels[i]).collect(),
        }
    }
}

/// Epoch-wise shuffled minibatches; `None` means "use the whole dataset".
struct Batcher {
    order: Vec<usize>,
    pos: usize,
    size: usize,
}

impl Batcher {
    fn new(n: usize, size: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            size,
        }
    }

    fn next(&mut self, rng: &mut Rng) -> Option<Vec<usize>> {
        let n = self.order.len();
        if self.size >= n {
            return None;
        }
        if self.pos + self.size > n {
            rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let idx = self.order[self.pos..self.pos + self.size].to_vec();
        self.pos += self.size;
        Some(idx)
    }
}

fn step(
    model: &mut Model,
    opt: &mut Sgd,
    loss: &LossConfig,
    batch: &Batch,
    tracker: &mut DistortionTracker,
) -> Result<f64> {
    let (features, cache) = model.net.forward(&batch.x)?;
    let out = loss.evaluate(&features, &model.agents, model.bias.as_deref(), model.scale, &batch.y)?;
    if !out.value.is_finite() {
        return Ok(out.value);
    }
    tracker.update(agent_distortion_bound(&features, &model.agents, &batch.y));
    let layer_grads = model.net.backward(&cache, &out.grad_features)?;
    let mut bias_grad = out.grad_bias.unwrap_or_default();
    let scale_grad = [out.grad_scale.unwrap_or(0.0)];

    let mut groups = Vec::new();
    for (layer, g) in model.net.layers_mut().iter_mut().zip(&layer_grads) {
        let Layer { weights, bias } = layer;
        groups.push(ParamGroup {
            values: weights.as_mut_slice(),
            grad: g.weights.as_slice(),
            decay: true,
        });
        if let (Some(b), Some(gb)) = (bias.as_mut(), g.bias.as_ref()) {
            groups.push(ParamGroup {
                values: b,
                grad: gb,
                decay: false,
            });
        }
    }
    groups.push(ParamGroup {
        values: model.agents.as_mut_slice(),
        grad: out.grad_weights.as_slice(),
        decay: true,
    });
    if let Some(b) = model.bias.as_mut() {
        // the bias only receives gradient while the baseline softmax is active
        if bias_grad.len() != b.len() {
            bias_grad = vec![0.0; b.len()];
        }
        groups.push(ParamGroup {
            values: b,
            grad: &bias_grad,
            decay: false,
        });
    }
    groups.push(ParamGroup {
        values: std::slice::from_mut(&mut model.scale),
        grad: &scale_grad,
        decay: false,
    });
    opt.step(groups);
    model.scale = model.scale.max(MIN_SCALE);
    if !model.agents.is_finite() || !model.scale.is_finite() {
        return Err(Error::NonFinite("parameters after update"));
    }
    Ok(out.value)
}
