//! Central finite-difference checks of the analytic gradients.
//!
//! The numeric side only ever calls loss *values*, so it stays independent of
//! the backward code it checks.

use crate::error::Result;
use crate::linalg::{Matrix, Rng};
use crate::losses::{hinge_arguments, LossConfig, LossKind, MetricLoss, Scale};
use crate::normalization::{normalize_backward, normalize_forward};

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;
/// Instances with any hinge argument closer to zero than this are redrawn.
pub const KINK_EXCLUSION: f64 = 1e-3;

/// `‖a − b‖ / max(‖a‖, ‖b‖)` over one parameter group; `0` when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = l2_norm_exact(analytic).max(l2_norm_exact(numeric));
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

fn l2_norm_exact(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central differences of `f` at `x`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_error: f64,
    /// Instances redrawn because they sat too close to a hinge kink.
    pub redrawn: usize,
}

impl GradReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst_error: 0.0,
            redrawn: 0,
        }
    }

    fn record(&mut self, err: f64, tol: f64) {
        self.worst_error = self.worst_error.max(err);
        if !(err <= tol) {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

/// The losses covered by the full suite, labelled for reporting.
pub fn loss_suite() -> Vec<(&'static str, LossConfig)> {
    vec![
        (
            "baseline_softmax",
            LossConfig::new(LossKind::BaselineSoftmax).with_bias(true),
        ),
        (
            "scaled_cosine_softmax(fixed s)",
            LossConfig::new(LossKind::ScaledCosineSoftmax).with_scale(Scale::Fixed(5.0)),
        ),
        (
            "scaled_cosine_softmax(learned s)",
            LossConfig::new(LossKind::ScaledCosineSoftmax).with_scale(Scale::Learned(5.0)),
        ),
        ("c_contrastive", LossConfig::new(LossKind::CContrastive)),
        ("c_triplet", LossConfig::new(LossKind::CTriplet)),
        ("c_triplet_center", LossConfig::new(LossKind::CTripletCenter)),
        (
            "softmax+c_contrastive",
            LossConfig::new(LossKind::Combination(MetricLoss::Contrastive))
                .with_scale(Scale::Learned(5.0))
                .with_combo_weight(0.5),
        ),
    ]
}

/// Shape of the random instances.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            samples: 6,
            dim: 4,
            classes: 5,
        }
    }
}

struct Instance {
    features: Matrix,
    agents: Matrix,
    bias: Vec<f64>,
    labels: Vec<usize>,
    s: f64,
}

fn draw_instance(rng: &mut Rng, shape: InstanceShape, cfg: &LossConfig) -> Instance {
    let feature_scale = rng.uniform_range(0.5, 3.0);
    let s = match cfg.scale {
        Scale::Fixed(s) => s,
        Scale::Learned(_) => rng.uniform_range(1.0, 15.0),
    };
    Instance {
        features: rng.normal_matrix(shape.samples, shape.dim, feature_scale),
        agents: rng.normal_matrix(shape.dim, shape.classes, 1.0),
        bias: rng.normal_vec(shape.classes),
        labels: (0..shape.samples).map(|_| rng.index(shape.classes)).collect(),
        s,
    }
}

fn near_kink(cfg: &LossConfig, inst: &Instance) -> Result<bool> {
    let metric = match cfg.kind {
        LossKind::CContrastive => MetricLoss::Contrastive,
        LossKind::CTriplet => MetricLoss::Triplet,
        LossKind::CTripletCenter => MetricLoss::TripletCenter,
        LossKind::Combination(m) => m,
        _ => return Ok(false),
    };
    let h = hinge_arguments(
        &inst.features,
        &inst.agents,
        &inst.labels,
        metric,
        cfg.margin(),
        cfg.normalization,
    )?;
    Ok(h.iter().any(|v| v.abs() <= KINK_EXCLUSION))
}

/// Checks every gradient the loss produces on `trials` random instances.
pub fn check_loss(
    name: &str,
    cfg: &LossConfig,
    trials: usize,
    shape: InstanceShape,
    rng: &mut Rng,
) -> Result<GradReport> {
    let mut report = GradReport::new(name);
    let bias_on = cfg.kind == LossKind::BaselineSoftmax && cfg.use_bias;
    while report.trials < trials {
        let inst = draw_instance(rng, shape, cfg);
        if near_kink(cfg, &inst)? {
            report.redrawn += 1;
            continue;
        }
        report.trials += 1;
        let bias = bias_on.then_some(inst.bias.as_slice());
        let out = cfg.evaluate(&inst.features, &inst.agents, bias, inst.s, &inst.labels)?;
        let value = |f: &Matrix, w: &Matrix, b: Option<&[f64]>, s: f64| {
            cfg.evaluate(f, w, b, s, &inst.labels)
                .map(|o| o.value)
                .unwrap_or(f64::NAN)
        };

        let (rows, cols) = inst.features.shape();
        let num_f = numeric_gradient(
            |x| {
                let f = Matrix::from_vec(rows, cols, x.to_vec()).unwrap();
                value(&f, &inst.agents, bias, inst.s)
            },
            inst.features.as_slice(),
            FD_STEP,
        );
        report.record(
            relative_error(out.grad_features.as_slice(), &num_f),
            FD_TOLERANCE,
        );

        let (rows, cols) = inst.agents.shape();
        let num_w = numeric_gradient(
            |x| {
                let w = Matrix::from_vec(rows, cols, x.to_vec()).unwrap();
                value(&inst.features, &w, bias, inst.s)
            },
            inst.agents.as_slice(),
            FD_STEP,
        );
        report.record(
            relative_error(out.grad_weights.as_slice(), &num_w),
            FD_TOLERANCE,
        );

        if let Some(gb) = &out.grad_bias {
            let num_b = numeric_gradient(
                |b| value(&inst.features, &inst.agents, Some(b), inst.s),
                &inst.bias,
                FD_STEP,
            );
            report.record(relative_error(gb, &num_b), FD_TOLERANCE);
        }
        if let Some(gs) = out.grad_scale {
            let num_s = numeric_gradient(
                |s| value(&inst.features, &inst.agents, bias, s[0]),
                &[inst.s],
                FD_STEP,
            );
            report.record(relative_error(&[gs], &num_s), FD_TOLERANCE);
        }
    }
    Ok(report)
}

/// Backward of the normalization layer against the finite-difference
/// Jacobian-vector product of `⟨g, x̃(x)⟩`.
pub fn check_normalization(trials: usize, dim: usize, rng: &mut Rng) -> GradReport {
    let mut report = GradReport::new("normalize_backward");
    for _ in 0..trials {
        report.trials += 1;
        let scale = 10f64.powf(rng.uniform_range(-1.0, 2.0));
        let x: Vec<f64> = rng.unit_vector(dim).iter().map(|v| v * scale).collect();
        let g = rng.normal_vec(dim);
        let analytic = normalize_backward(&normalize_forward(&x), &g);
        let numeric = numeric_gradient(
            |x| {
                let c = normalize_forward(x);
                c.output.iter().zip(&g).map(|(a, b)| a * b).sum()
            },
            &x,
            FD_STEP,
        );
        report.record(relative_error(&analytic, &numeric), FD_TOLERANCE);
    }
    report
}

/// Runs the normalization check and every loss in [`loss_suite`].
pub fn run_suite(trials: usize, seed: u64) -> Result<Vec<GradReport>> {
    let mut rng = Rng::new(seed);
    let mut out = vec![check_normalization(trials, 6, &mut rng)];
    for (name, cfg) in loss_suite() {
        out.push(check_loss(name, &cfg, trials, InstanceShape::default(), &mut rng)?);
    }
    Ok(out)
}
