use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use hyperembed::eval::{
    kfold_accuracy, load_pair_list, pair_rows, synthetic_video_pairs, tpr_at_far, video_kfold, video_pairs,
    write_far_tpr, write_fold_results, PairSet, VideoPair, VideoSimConfig,
};
use hyperembed::gradcheck::{check_loss, check_normalization, loss_suite, GradReport, InstanceShape};
use hyperembed::linalg::l2_norm;
use hyperembed::store::{load_features, save_features, Bundle};
use hyperembed::theory::{
    bound_curve, prop1_check, prop2_bound, prop2_empirical_gap, prop3_distortion, write_bound_curve, GapOptions,
};
use hyperembed::trainer::{
    export_feature_scatter, load_mnist_idx, make_blobs, near_origin_classes, radialness, train, write_loss_curve,
    Dataset, EmbeddingNet, TrainReport, PATHOLOGY_RATIO,
};
use hyperembed::{Error, Matrix, Rng};

use crate::config::{DataSection, RunConfig};

pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_FARS: [f64; 3] = [1e-3, 1e-2, 1e-1];
pub const DEFAULT_SYNTHETIC_PAIRS: usize = 500;
pub const DEFAULT_CURVE_N: [usize; 4] = [10, 1000, 10_575, 100_000];

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration or input file.
    Config(String),
    /// A verification check ran and failed.
    Check(String),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Check(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Format { .. } => CliError::Config(e.to_string()),
            e => CliError::Run(e),
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Flags shared by every subcommand, resolved against the config file.
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    out: Option<PathBuf>,
}

impl Context {
    pub fn new(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<Self> {
        let config = match config {
            Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
            None => RunConfig::default(),
        };
        let seed = seed.or(config.seed).unwrap_or(0);
        Ok(Self { config, seed, out })
    }

    fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn dataset(ctx: &Context) -> CliResult<Dataset> {
    Ok(match &ctx.config.data {
        DataSection::Blobs {
            classes,
            per_class,
            dim,
            spread,
        } => make_blobs(*classes, *per_class, *dim, *spread, ctx.seed).map_err(|e| CliError::Config(format!("data: {e}")))?,
        DataSection::Mnist { images, labels } => load_mnist_idx(images, labels)?,
    })
}

fn fit(ctx: &Context) -> CliResult<(Dataset, TrainReport)> {
    let data = dataset(ctx)?;
    let cfg = ctx.config.train_config(ctx.seed).map_err(CliError::Config)?;
    let m = &ctx.config.model;
    let mut sizes = vec![data.input_dim()];
    sizes.extend(&m.hidden);
    sizes.push(m.feature_dim);
    let net = EmbeddingNet::new(&sizes, &mut Rng::new(ctx.seed)).map_err(|e| CliError::Config(format!("model: {e}")))?;
    let report = train(net, &data, &cfg)?;
    Ok((data, report))
}

pub fn train_cmd(ctx: &Context) -> CliResult {
    let out = ctx.out_dir()?;
    let (data, report) = fit(ctx)?;
    let loss = ctx.config.loss_config().map_err(CliError::Config)?;
    write_loss_curve(&out.join("loss_curve.csv"), &report.loss_curve)?;
    report.model.save(&out.join("model.bin"))?;
    for s in &report.snapshots {
        s.model.save(&out.join(format!("snapshot_{}.bin", s.iteration)))?;
    }
    save_features(&out.join("features.bin"), &report.model.embed(&data.samples)?)?;
    println!("iterations     {}", report.loss_curve.len());
    println!("final loss     {:.6}", report.loss_curve.last().copied().unwrap_or(f64::NAN));
    println!("train accuracy {:.4}", report.model.accuracy(&data, &loss)?);
    if loss.kind.uses_scale() {
        println!("scale          {:.4}", report.model.scale);
    }
    println!("distortion     {:.6}", report.distortion);
    println!("wrote {}", out.display());
    Ok(())
}

pub fn scatter_cmd(ctx: &Context) -> CliResult {
    if ctx.config.model.feature_dim != 2 {
        return Err(CliError::Config(format!(
            "scatter needs model.feature_dim = 2, got {}",
            ctx.config.model.feature_dim
        )));
    }
    let out = ctx.out_dir()?;
    let (data, report) = fit(ctx)?;
    write_loss_curve(&out.join("loss_curve.csv"), &report.loss_curve)?;
    let f = export_feature_scatter(&report.model.net, &data, &out.join("scatter.csv"))?;
    println!("radialness {:.4}", radialness(&f, &data.labels, data.classes));
    let near = near_origin_classes(&f, &data.labels, data.classes, PATHOLOGY_RATIO);
    println!("near-origin classes {near:?}");
    println!("wrote {}", out.display());
    Ok(())
}

pub fn bounds_cmd(ctx: &Context, n: Option<usize>, ell_sq: Option<f64>) -> CliResult {
    match (n, ell_sq) {
        (Some(n), Some(l)) => {
            if n < 2 || !(l >= 0.0 && l.is_finite()) {
                return Err(CliError::Config(format!("need n >= 2 and ell_sq >= 0, got n={n}, ell_sq={l}")));
            }
            println!("{:.2}", prop2_bound(n, l));
            if ctx.out.is_none() {
                return Ok(());
            }
        }
        (None, None) => {}
        _ => return Err(CliError::Config("--n and --ell-sq go together".into())),
    }
    let ns = ctx.config.bounds.n.clone().unwrap_or_else(|| DEFAULT_CURVE_N.to_vec());
    let ls = ctx
        .config
        .bounds
        .ell_sq
        .clone()
        .unwrap_or_else(|| (1..=20).map(|i| i as f64 * 0.5).collect());
    if ns.iter().any(|&v| v < 2) || ls.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(CliError::Config("bounds: n must be >= 2 and ell_sq >= 0".into()));
    }
    let path = ctx.out_dir()?.join("bound_curve.csv");
    write_bound_curve(&path, &bound_curve(&ns, &ls))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn gradcheck_cmd(seed: u64, loss: &str, trials: usize) -> CliResult {
    if trials == 0 {
        return Err(CliError::Config("--trials must be positive".into()));
    }
    let suite = loss_suite();
    let known: Vec<&str> = std::iter::once("normalize").chain(suite.iter().map(|(n, _)| *n)).collect();
    if loss != "all" && !known.contains(&loss) {
        return Err(CliError::Config(format!("unknown loss '{loss}'; expected all or one of {}", known.join(", "))));
    }
    let mut rng = Rng::new(seed);
    let mut reports: Vec<GradReport> = Vec::new();
    if loss == "all" || loss == "normalize" {
        reports.push(check_normalization(trials, 6, &mut rng));
    }
    for (name, cfg) in &suite {
        if loss == "all" || loss == *name {
            reports.push(check_loss(name, cfg, trials, InstanceShape::default(), &mut rng)?);
        }
    }
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed() { "ok  " } else { "FAIL" };
        println!(
            "{status} {:<34} {:>4}/{} passed, worst relative error {:.2e}",
            r.name,
            r.trials - r.failures,
            r.trials,
            r.worst_error
        );
        if !r.passed() {
            failed.push(r.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("gradient mismatch in {}", failed.join(", "))))
    }
}

pub fn eval_pairs_cmd(ctx: &Context) -> CliResult {
    let e = &ctx.config.eval;
    let (Some(features), Some(pairs)) = (&e.features, &e.pairs) else {
        return Err(CliError::Config("eval-pairs needs eval.features and eval.pairs".into()));
    };
    let store = load_features(features)?;
    let entries = load_pair_list(pairs)?;
    let list = pair_rows(&entries, store.rows(), pairs)?;
    let set = PairSet::from_store(&store, &list, e.folds.unwrap_or(DEFAULT_FOLDS))
        .map_err(|err| CliError::Config(err.to_string()))?;
    // full-dimension PCA unless told otherwise; 0 scores raw features
    let pca = match e.pca {
        None => Some(store.cols()),
        Some(0) => None,
        Some(k) if k > store.cols() => {
            return Err(CliError::Config(format!("eval.pca = {k} exceeds the feature dimension {}", store.cols())))
        }
        keep => keep,
    };
    let result = kfold_accuracy(&set, pca)?;
    let (scores, labels) = (set.scores(), set.labels());
    let mut far_points = Vec::new();
    for &far in e.far.as_deref().unwrap_or(&DEFAULT_FARS) {
        match tpr_at_far(&scores, &labels, far) {
            Ok(p) => far_points.push((far, Some(p))),
            Err(Error::FarUnresolvable { .. }) => far_points.push((far, None)),
            Err(err) => return Err(CliError::Config(format!("eval.far: {err}"))),
        }
    }
    let out = ctx.out_dir()?;
    write_fold_results(&out.join("fold_results.csv"), &result.folds)?;
    write_far_tpr(&out.join("far_tpr.csv"), &far_points)?;
    println!("{} pairs, {} folds", set.len(), set.k());
    println!("accuracy {:.4} ± {:.4}", result.mean, result.stderr);
    for (far, p) in &far_points {
        match p {
            Some(p) => println!("TPR@FAR={far}: {:.4}", p.tpr),
            None => println!("TPR@FAR={far}: unresolvable with {} negatives", labels.iter().filter(|l| !**l).count()),
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn eval_video_cmd(ctx: &Context) -> CliResult {
    let v = &ctx.config.video;
    let pairs: Vec<VideoPair> = match (&v.videos, &v.pairs) {
        (Some(videos), Some(list)) => {
            let bundle = Bundle::load(videos)?;
            let entries = load_pair_list(list)?;
            video_pairs(&entries, &bundle, list)?
                .into_iter()
                .map(|(a, b, same)| VideoPair::from_frames(a, b, same))
                .collect::<hyperembed::Result<_>>()?
        }
        (None, None) => {
            let n = v.synthetic_pairs.unwrap_or(DEFAULT_SYNTHETIC_PAIRS);
            synthetic_video_pairs(n, &VideoSimConfig::default(), &mut Rng::new(ctx.seed))
        }
        _ => return Err(CliError::Config("video.videos and video.pairs go together".into())),
    };
    let r = video_kfold(&pairs, v.folds.unwrap_or(DEFAULT_FOLDS), &ctx.config.svm_options())
        .map_err(|e| match e {
            Error::InvalidArgument(m) => CliError::Config(m),
            e => CliError::from(e),
        })?;
    let out = ctx.out_dir()?;
    write_fold_results(&out.join("fold_results.csv"), &r.svm.folds)?;
    println!("{} video pairs", pairs.len());
    println!("HIK-SVM    {:.4} ± {:.4}", r.svm.mean, r.svm.stderr);
    println!("mean score {:.4} ± {:.4}", r.mean_score.mean, r.mean_score.stderr);
    println!("wrote {}", out.display());
    Ok(())
}

fn unit_cluster(rng: &mut Rng, center: &[f64], size: usize, spread: f64) -> hyperembed::Result<Matrix> {
    let rows: Vec<Vec<f64>> = (0..size)
        .map(|_| {
            let v: Vec<f64> = center.iter().map(|c| c + spread * rng.normal()).collect();
            let n = l2_norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    Matrix::from_rows(&rows)
}

pub fn prop_check_cmd(seed: u64, trials: usize) -> CliResult {
    let mut rng = Rng::new(seed);
    let mut failures = Vec::new();

    let mut bad = 0;
    for _ in 0..trials {
        let (d, n) = (1 + rng.index(16), 2 + rng.index(20));
        let w = rng.normal_matrix(d, n, 1.0);
        let f = rng.normal_vec(d);
        let s = 1.0 + 1e-6 + 20.0 * rng.uniform();
        if !prop1_check(&w, &f, s)? {
            bad += 1;
        }
    }
    println!("scaling raises the top probability: {bad} of {trials} instances failed");
    if bad > 0 {
        failures.push("feature scaling");
    }

    let mut worst_gap = 0.0f64;
    let mut below = 0;
    for (d, n) in [(2, 3), (3, 4), (2, 6), (4, 10)] {
        let r = prop2_empirical_gap(d, n, 1.0, &GapOptions::default())?;
        if n <= d + 1 {
            worst_gap = worst_gap.max(r.gap.abs());
        }
        if r.achieved < r.bound - 1e-9 {
            below += 1;
        }
    }
    println!("loss floor: simplex gap {worst_gap:.2e}, {below} configurations below the bound");
    if worst_gap > 1e-6 || below > 0 {
        failures.push("loss floor");
    }

    let mut violations = 0;
    for _ in 0..trials {
        let d = 2 + rng.index(15);
        let f0 = rng.unit_vector(d);
        let agent = rng.unit_vector(d);
        let spread = rng.uniform_range(0.05, 2.0);
        let size = 1 + rng.index(20);
        let cluster = unit_cluster(&mut rng, &agent, size, spread)?;
        let r = prop3_distortion(&f0, &cluster, &agent)?;
        if r.distortion > r.bound {
            violations += 1;
        }
    }
    println!("agent distortion bound: {violations} of {trials} clusters violate it");
    if violations > 0 {
        failures.push("agent distortion");
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join(", ")))
    }
}
