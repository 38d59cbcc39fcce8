//! Classification losses over (optionally) normalized features and agents.
//!
//! Every loss takes the raw `m x d` feature batch and the raw `d x n` agent
//! matrix, normalizes internally where the loss calls for it, and returns
//! gradients with respect to the raw inputs (chained through
//! [`crate::normalization`]).

mod metric;
mod softmax;

pub use metric::{c_contrastive, c_triplet, c_triplet_center, hinge_arguments};
pub use softmax::{baseline_softmax, euclidean_form_equivalence, scaled_cosine_softmax};

use crate::error::{Error, Result};
use crate::linalg::{dot, l2_norm, Matrix};
use crate::normalization::{ColNorm, RowNorm};

/// Learned `s` starts here.
pub const DEFAULT_LEARNED_SCALE: f64 = 10.0;
/// Fixed `s` when not learned.
pub const DEFAULT_FIXED_SCALE: f64 = 30.0;
pub const DEFAULT_CONTRASTIVE_MARGIN: f64 = 1.0;
pub const DEFAULT_TRIPLET_MARGIN: f64 = 0.8;
pub const DEFAULT_COMBO_WEIGHT: f64 = 0.01;

/// The `d x n` weight matrix whose columns act as per-class agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMatrix {
    w: Matrix,
    normalized_columns: bool,
}

impl AgentMatrix {
    pub fn new(w: Matrix) -> Self {
        Self {
            w,
            normalized_columns: false,
        }
    }

    /// Rescales every column to unit norm.
    pub fn normalized(w: Matrix) -> Self {
        Self {
            w: ColNorm::forward(&w).output,
            normalized_columns: true,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        self.normalized_columns = false;
        &mut self.w
    }

    pub fn into_inner(self) -> Matrix {
        self.w
    }

    pub fn has_normalized_columns(&self) -> bool {
        self.normalized_columns
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn classes(&self) -> usize {
        self.w.cols()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.w.cols()).map(|j| l2_norm(&self.w.col(j))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Fixed(f64),
    /// Initial value; the trainer owns the running value.
    Learned(f64),
}

impl Scale {
    pub fn initial(self) -> f64 {
        match self {
            Scale::Fixed(s) | Scale::Learned(s) => s,
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Scale::Learned(_))
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale::Learned(DEFAULT_LEARNED_SCALE)
    }
}

/// Which side of the similarity is projected onto the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationMode {
    #[default]
    Both,
    FeaturesOnly,
    WeightsOnly,
}

impl NormalizationMode {
    fn features(self) -> bool {
        matches!(self, NormalizationMode::Both | NormalizationMode::FeaturesOnly)
    }

    fn weights(self) -> bool {
        matches!(self, NormalizationMode::Both | NormalizationMode::WeightsOnly)
    }
}

/// Agent-based metric losses usable on their own or as the second term of a
/// combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricLoss {
    Contrastive,
    Triplet,
    TripletCenter,
}

impl MetricLoss {
    pub fn default_margin(self) -> f64 {
        match self {
            MetricLoss::Contrastive => DEFAULT_CONTRASTIVE_MARGIN,
            MetricLoss::Triplet | MetricLoss::TripletCenter => DEFAULT_TRIPLET_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    BaselineSoftmax,
    ScaledCosineSoftmax,
    CContrastive,
    CTriplet,
    CTripletCenter,
    /// Scaled-cosine softmax plus `combo_weight` times a metric loss.
    Combination(MetricLoss),
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::BaselineSoftmax => "baseline_softmax",
            LossKind::ScaledCosineSoftmax => "scaled_cosine_softmax",
            LossKind::CContrastive => "c_contrastive",
            LossKind::CTriplet => "c_triplet",
            LossKind::CTripletCenter => "c_triplet_center",
            LossKind::Combination(MetricLoss::Contrastive) => "softmax+c_contrastive",
            LossKind::Combination(MetricLoss::Triplet) => "softmax+c_triplet",
            LossKind::Combination(MetricLoss::TripletCenter) => "softmax+c_triplet_center",
        }
    }

    /// Whether the loss consumes the scale parameter.
    pub fn uses_scale(self) -> bool {
        matches!(
            self,
            LossKind::ScaledCosineSoftmax | LossKind::Combination(_)
        )
    }

    fn metric(self) -> Option<MetricLoss> {
        match self {
            LossKind::CContrastive => Some(MetricLoss::Contrastive),
            LossKind::CTriplet => Some(MetricLoss::Triplet),
            LossKind::CTripletCenter => Some(MetricLoss::TripletCenter),
            LossKind::Combination(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    pub scale: Scale,
    /// `None` picks the per-loss default (1 for contrastive, 0.8 for triplet).
    pub margin: Option<f64>,
    pub combo_weight: f64,
    /// Only meaningful for [`LossKind::BaselineSoftmax`].
    pub use_bias: bool,
    pub normalization: NormalizationMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::new(LossKind::ScaledCosineSoftmax)
    }
}

impl LossConfig {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            scale: Scale::default(),
            margin: None,
            combo_weight: DEFAULT_COMBO_WEIGHT,
            use_bias: false,
            normalization: NormalizationMode::Both,
        }
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_margin(mut self, m: f64) -> Self {
        self.margin = Some(m);
        self
    }

    pub fn with_combo_weight(mut self, w: f64) -> Self {
        self.combo_weight = w;
        self
    }

    pub fn with_bias(mut self, on: bool) -> Self {
        self.use_bias = on;
        self
    }

    pub fn with_normalization(mut self, mode: NormalizationMode) -> Self {
        self.normalization = mode;
        self
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or_else(|| {
            self.kind
                .metric()
                .map_or(DEFAULT_CONTRASTIVE_MARGIN, MetricLoss::default_margin)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale.initial();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {s}")));
        }
        let m = self.margin();
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("margin must be >= 0, got {m}")));
        }
        if !(self.combo_weight >= 0.0 && self.combo_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "combo_weight must be >= 0, got {}",
                self.combo_weight
            )));
        }
        if self.use_bias && self.kind != LossKind::BaselineSoftmax {
            return Err(Error::InvalidArgument(
                "a bias term is only allowed with the baseline softmax".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the configured loss at scale `s` (ignored by losses without one).
    pub fn evaluate(
        &self,
        features: &Matrix,
        agents: &Matrix,
        bias: Option<&[f64]>,
        s: f64,
        labels: &[usize],
    ) -> Result<LossOutput> {
        let learn = self.scale.is_learned();
        let mode = self.normalization;
        match self.kind {
            LossKind::BaselineSoftmax => {
                baseline_softmax(features, agents, bias.filter(|_| self.use_bias), labels)
            }
            LossKind::ScaledCosineSoftmax => {
                scaled_cosine_softmax(features, agents, s, learn, labels, mode)
            }
            LossKind::CContrastive => c_contrastive(features, agents, labels, self.margin(), mode),
            LossKind::CTriplet => c_triplet(features, agents, labels, self.margin(), mode),
            LossKind::CTripletCenter => {
                c_triplet_center(features, agents, labels, self.margin(), mode)
            }
            LossKind::Combination(second) => combined_loss(
                features,
                agents,
                labels,
                s,
                learn,
                second,
                self.margin(),
                self.combo_weight,
                mode,
            ),
        }
    }

    /// Class scores used for prediction: raw inner products (plus bias) for
    /// the baseline, similarities under the configured normalization otherwise.
    pub fn logits(&self, features: &Matrix, agents: &Matrix, bias: Option<&[f64]>) -> Result<Matrix> {
        match self.kind {
            LossKind::BaselineSoftmax => {
                let mut z = features.matmul(agents)?;
                if let Some(b) = bias.filter(|_| self.use_bias) {
                    for i in 0..z.rows() {
                        z.row_mut(i).iter_mut().zip(b).for_each(|(v, bj)| *v += bj);
                    }
                }
                Ok(z)
            }
            _ => Embedded::new(features, agents, self.normalization).similarities(),
        }
    }
}

/// `softmax + weight · metric`, sharing one pass of normalization.
#[allow(clippy::too_many_arguments)]
pub fn combined_loss(
    features: &Matrix,
    agents: &Matrix,
    labels: &[usize],
    s: f64,
    learn_scale: bool,
    second: MetricLoss,
    margin: f64,
    weight: f64,
    mode: NormalizationMode,
) -> Result<LossOutput> {
    let mut out = scaled_cosine_softmax(features, agents, s, learn_scale, labels, mode)?;
    if weight == 0.0 {
        return Ok(out);
    }
    let extra = match second {
        MetricLoss::Contrastive => c_contrastive(features, agents, labels, margin, mode)?,
        MetricLoss::Triplet => c_triplet(features, agents, labels, margin, mode)?,
        MetricLoss::TripletCenter => c_triplet_center(features, agents, labels, margin, mode)?,
    };
    out.value += weight * extra.value;
    out.grad_features.axpy(weight, &extra.grad_features);
    out.grad_weights.axpy(weight, &extra.grad_weights);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    /// `m x d`, with respect to the raw features.
    pub grad_features: Matrix,
    /// `d x n`, with respect to the raw agents.
    pub grad_weights: Matrix,
    pub grad_bias: Option<Vec<f64>>,
    /// `∂L/∂s`, present when the scale is learned.
    pub grad_scale: Option<f64>,
}

impl LossOutput {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_features.is_finite()
            && self.grad_weights.is_finite()
            && self.grad_bias.as_ref().is_none_or(|b| b.iter().all(|v| v.is_finite()))
            && self.grad_scale.is_none_or(f64::is_finite)
    }
}

pub(crate) fn check_inputs(features: &Matrix, agents: &Matrix, labels: &[usize]) -> Result<()> {
    if features.cols() != agents.rows() {
        return Err(Error::dims(
            "loss",
            format!("feature dim = agent dim ({})", agents.rows()),
            features.cols(),
        ));
    }
    if labels.len() != features.rows() {
        return Err(Error::dims("loss labels", features.rows(), labels.len()));
    }
    if agents.cols() == 0 {
        return Err(Error::InvalidArgument("no classes".into()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= agents.cols()) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: agents.cols(),
        });
    }
    Ok(())
}

/// Features and agents after (optional) normalization, with what is needed to
/// chain gradients back to the raw inputs.
pub(crate) struct Embedded {
    pub f: Matrix,
    pub w: Matrix,
    fnorm: Option<RowNorm>,
    wnorm: Option<ColNorm>,
}

impl Embedded {
    pub fn new(features: &Matrix, agents: &Matrix, mode: NormalizationMode) -> Self {
        let fnorm = mode.features().then(|| RowNorm::forward(features));
        let wnorm = mode.weights().then(|| ColNorm::forward(agents));
        Self {
            f: fnorm.as_ref().map_or_else(|| features.clone(), |n| n.output.clone()),
            w: wnorm.as_ref().map_or_else(|| agents.clone(), |n| n.output.clone()),
            fnorm,
            wnorm,
        }
    }

    /// `m x n` matrix of `f̂ᵢᵀ ŵⱼ`.
    pub fn similarities(&self) -> Result<Matrix> {
        self.f.matmul(&self.w)
    }

    /// `m x n` matrix of `‖f̂ᵢ − ŵⱼ‖²`.
    pub fn squared_distances(&self) -> Matrix {
        let (m, n) = (self.f.rows(), self.w.cols());
        let wt = self.w.transpose();
        Matrix::from_fn(m, n, |i, j| crate::linalg::squared_distance(self.f.row(i), wt.row(j)))
    }

    /// Gradients for an upstream `∂L/∂C` on the similarity matrix.
    pub fn backward_similarity(&self, dc: &Matrix) -> Result<(Matrix, Matrix)> {
        let gf = dc.matmul_t(&self.w)?;
        let gw = self.f.t_matmul(dc)?;
        Ok(self.chain(gf, gw))
    }

    /// Gradients for an upstream `∂L/∂D` on the squared-distance matrix.
    pub fn backward_distance(&self, dd: &Matrix) -> Result<(Matrix, Matrix)> {
        let (m, n) = dd.shape();
        // ∂D_ij/∂f̂ᵢ = 2(f̂ᵢ − ŵⱼ), ∂D_ij/∂ŵⱼ = −2(f̂ᵢ − ŵⱼ)
        let mut gf = dd.matmul_t(&self.w)?;
        gf.scale(-2.0);
        for i in 0..m {
            let rs: f64 = dd.row(i).iter().sum();
            let fi = self.f.row(i).to_vec();
            gf.row_mut(i).iter_mut().zip(&fi).for_each(|(g, f)| *g += 2.0 * rs * f);
        }
        let mut gw = self.f.t_matmul(dd)?;
        gw.scale(-2.0);
        for j in 0..n {
            let cs: f64 = (0..m).map(|i| dd[(i, j)]).sum();
            for k in 0..gw.rows() {
                gw[(k, j)] += 2.0 * cs * self.w[(k, j)];
            }
        }
        Ok(self.chain(gf, gw))
    }

    fn chain(&self, gf: Matrix, gw: Matrix) -> (Matrix, Matrix) {
        let gf = match &self.fnorm {
            Some(n) => n.backward(&gf),
            None => gf,
        };
        let gw = match &self.wnorm {
            Some(n) => n.backward(&gw),
            None => gw,
        };
        (gf, gw)
    }
}

/// Dot product of unit-normalized copies; used by tests and diagnostics.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (l2_norm(a) * l2_norm(b))
}
