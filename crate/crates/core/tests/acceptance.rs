//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hyperembed::eval::*;
use hyperembed::gradcheck::run_suite;
use hyperembed::linalg::{l2_norm, symmetric_eigen, EPS};
use hyperembed::losses::{euclidean_form_equivalence, scaled_cosine_softmax};
use hyperembed::normalization::{normalize_backward, normalize_forward};
use hyperembed::theory::*;
use hyperembed::trainer::*;
use hyperembed::{LossConfig, LossKind, Matrix, NormalizationMode, Rng, Scale};

type Check = fn() -> Result<String, String>;

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bound_value() -> Result<String, String> {
    let t = Instant::now();
    let b = prop2_bound(10_575, 1.0);
    within(t.elapsed(), Duration::from_millis(1))?;
    ensure((b - 8.27).abs() <= 0.01, || format!("bound {b:.4}"))?;
    Ok(format!("prop2_bound(10575, 1) = {b:.4}"))
}

fn extreme_probabilities() -> Result<String, String> {
    let t = Instant::now();
    let p10 = extreme_case_probability(10, 1.0);
    let p1000 = extreme_case_probability(1000, 1.0);
    within(t.elapsed(), Duration::from_millis(1))?;
    ensure((p10 - 0.45).abs() <= 0.005, || format!("n=10: {p10:.5}"))?;
    ensure((p1000 - 0.007).abs() <= 0.0005, || format!("n=1000: {p1000:.5}"))?;
    Ok(format!("n=10: {p10:.4}, n=1000: {p1000:.5}"))
}

fn gradient_suite() -> Result<String, String> {
    let t = Instant::now();
    let reports = run_suite(100, 2024).map_err(|e| e.to_string())?;
    within(t.elapsed(), Duration::from_secs(30))?;
    let mut worst = 0.0f64;
    for r in &reports {
        ensure(r.trials == 100 && r.passed(), || {
            format!("{}: {} of {} failed, worst {:.2e}", r.name, r.failures, r.trials, r.worst_error)
        })?;
        worst = worst.max(r.worst_error);
    }
    Ok(format!("{} groups x 100 instances, worst relative error {worst:.2e}", reports.len()))
}

/// `Σ aᵢbᵢ` with error-free products and sums carried in a second word,
/// accurate as if computed in twice the working precision.
fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(*y, -p);
        let t = hi + p;
        let z = t - hi;
        lo += (hi - (t - z)) + (p - z) + pe;
        hi = t;
    }
    hi + lo
}

fn orthogonality_and_growth() -> Result<String, String> {
    let mut rng = Rng::new(4);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let d = 2 + rng.index(63);
        let scale = 10f64.powf(rng.uniform_range(-1.0, 2.0));
        let x: Vec<f64> = rng.normal_vec(d).into_iter().map(|v| v * scale).collect();
        let upstream = rng.normal_vec(d);
        let g = normalize_backward(&normalize_forward(&x), &upstream);
        let inner: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        let limit = 1e-9 * l2_norm(&x) * l2_norm(&g);
        worst = worst.max(inner.abs() / (l2_norm(&x) * l2_norm(&g)));
        ensure(inner.abs() <= limit, || format!("trial {trial}: |<x,g>| = {:.3e} > {limit:.3e}", inner.abs()))?;
        // ‖x + αg‖² − ‖x‖² = α(2⟨x,g⟩ + α‖g‖²), evaluated without forming
        // x + αg: at large ‖x‖ the growth is below one ulp of ‖x‖².
        let (xg, gg) = (dot2(&x, &g), dot2(&g, &g));
        for alpha in [1e-3, 0.1, 1.0, 10.0] {
            let growth = alpha * (2.0 * xg + alpha * gg);
            ensure(growth >= 0.0, || format!("trial {trial}, alpha {alpha}: norm shrank by {:.3e}", -growth))?;
        }
    }
    Ok(format!("1000 trials, worst |<x,g>|/(|x||g|) = {worst:.2e}"))
}

fn proposition1() -> Result<String, String> {
    let mut rng = Rng::new(1);
    for trial in 0..10_000 {
        let d = 1 + rng.index(16);
        let n = 2 + rng.index(20);
        let w = rng.normal_matrix(d, n, 1.0);
        let f = rng.normal_vec(d);
        let s = 1.0 + 1e-6 + rng.uniform() * 20.0;
        let ok = prop1_check(&w, &f, s).map_err(|e| e.to_string())?;
        ensure(ok, || format!("trial {trial} failed (d={d}, n={n}, s={s})"))?;
    }
    Ok("10000 instances, 0 failures".into())
}

fn proposition2_tightness() -> Result<String, String> {
    let mut details = Vec::new();
    for (d, n) in [(2, 3), (3, 4)] {
        let r = prop2_empirical_gap(d, n, 1.0, &GapOptions::default()).map_err(|e| e.to_string())?;
        ensure(r.gap.abs() <= 1e-6, || format!("simplex (d={d}, n={n}) gap {:.3e}", r.gap))?;
        details.push(format!("({d},{n}) gap {:.1e}", r.gap));
    }
    let mut tested = 0;
    for (d, n) in [(2, 3), (3, 4), (4, 5), (8, 9), (2, 4), (2, 10), (3, 10), (4, 12)] {
        for ell_sq in [0.5, 1.0, 4.0] {
            let r = prop2_empirical_gap(d, n, ell_sq, &GapOptions::default()).map_err(|e| e.to_string())?;
            ensure(r.achieved >= r.bound - 1e-9, || {
                format!("(d={d}, n={n}, l2={ell_sq}) achieved {} below bound {}", r.achieved, r.bound)
            })?;
            tested += 1;
        }
    }
    Ok(format!("{}; {tested} configurations at or above the bound", details.join(", ")))
}

fn convergence_failure() -> Result<String, String> {
    let t = Instant::now();
    let data = make_blobs(10, 50, 16, 0.2, 3).map_err(|e| e.to_string())?;
    let run = |scale: Scale| {
        let net = EmbeddingNet::new(&[16, 64, 16], &mut Rng::new(1))?;
        let loss = LossConfig::new(LossKind::ScaledCosineSoftmax).with_scale(scale);
        let cfg = TrainConfig {
            loss: loss.clone(),
            lr: 0.1,
            weight_decay: 0.0,
            batch_size: data.len(),
            iterations: 2000,
            ..TrainConfig::default()
        };
        let r = train(net, &data, &cfg)?;
        let acc = r.model.accuracy(&data, &loss)?;
        Ok::<_, hyperembed::Error>((r.loss_curve, acc))
    };
    let bound = prop2_bound(10, 1.0);
    let (fixed, _) = run(Scale::Fixed(1.0)).map_err(|e| e.to_string())?;
    let min = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let last = *fixed.last().unwrap();
    ensure(min >= bound - 1e-9, || format!("loss {min} dropped below bound {bound}"))?;
    ensure(last - bound <= 0.3, || format!("plateau {last:.4} more than 0.3 above bound {bound:.4}"))?;
    let (_, acc) = run(Scale::Learned(1.0)).map_err(|e| e.to_string())?;
    ensure(acc >= 0.99, || format!("learned-scale training accuracy {acc}"))?;
    within(t.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "s=1 plateau {last:.4} (min {min:.4}) vs bound {bound:.4}; learned s accuracy {acc:.3}"
    ))
}

fn proposition3() -> Result<String, String> {
    let mut rng = Rng::new(3);
    let mut tightest = f64::INFINITY;
    for trial in 0..1000 {
        let d = 2 + rng.index(15);
        let k = 1 + rng.index(20);
        let f0 = rng.unit_vector(d);
        let agent = rng.unit_vector(d);
        let spread = rng.uniform_range(0.05, 2.0);
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let v: Vec<f64> = agent.iter().map(|a| a + spread * rng.normal()).collect();
                let n = l2_norm(&v);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let cluster = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let r = prop3_distortion(&f0, &cluster, &agent).map_err(|e| e.to_string())?;
        ensure(r.distortion <= r.bound, || format!("trial {trial}: {} > {}", r.distortion, r.bound))?;
        tightest = tightest.min(r.bound - r.distortion);
    }
    Ok(format!("1000 clusters, 0 violations, smallest slack {tightest:.2e}"))
}

fn equivalence() -> Result<String, String> {
    let mut rng = Rng::new(9);
    let mut worst = 0.0f64;
    let mut worst_raw_excess = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (m, d, n) = (1 + rng.index(8), 2 + rng.index(8), 2 + rng.index(8));
        let labels: Vec<usize> = (0..m).map(|_| rng.index(n)).collect();
        let s = rng.uniform_range(0.1, 40.0);
        let value_gap = |f: &Matrix, w: &Matrix| -> Result<f64, String> {
            let cos = scaled_cosine_softmax(f, w, s, false, &labels, NormalizationMode::Both)
                .map_err(|e| e.to_string())?
                .value;
            let euc = euclidean_form_equivalence(f, w, s, &labels).map_err(|e| e.to_string())?;
            Ok((cos - euc).abs())
        };

        // the identity is stated for unit vectors
        let rows: Vec<Vec<f64>> = (0..m).map(|_| rng.unit_vector(d)).collect();
        let cols: Vec<Vec<f64>> = (0..n).map(|_| rng.unit_vector(d)).collect();
        let f = Matrix::from_fn(m, d, |i, k| rows[i][k]);
        let w = Matrix::from_fn(d, n, |k, j| cols[j][k]);
        worst = worst.max(value_gap(&f, &w)?);

        // raw inputs: the ε floor leaves ‖W̃ⱼ‖² = 1 − δⱼ with
        // δⱼ = ε/(‖wⱼ‖² + ε), shifting logits by at most (s/2)·max δ
        let raw_f = rng.normal_matrix(m, d, 1.0);
        let raw_w = rng.normal_matrix(d, n, 1.0);
        let max_delta = (0..n)
            .map(|j| {
                let sq = dot2(&raw_w.col(j), &raw_w.col(j));
                EPS / (sq + EPS)
            })
            .fold(0.0, f64::max);
        let excess = value_gap(&raw_f, &raw_w)? - 0.5 * s * max_delta;
        worst_raw_excess = worst_raw_excess.max(excess);
    }
    ensure(worst <= 1e-10, || format!("worst difference {worst:.3e}"))?;
    ensure(worst_raw_excess <= 1e-10, || {
        format!("raw inputs exceed the epsilon shift by {worst_raw_excess:.3e}")
    })?;
    Ok(format!(
        "1000 unit instances, worst difference {worst:.2e}; raw inputs within epsilon shift (+{:.1e})",
        worst_raw_excess.max(0.0)
    ))
}

fn radial_distribution() -> Result<String, String> {
    let t = Instant::now();
    let mut radial = Vec::new();
    let mut flagged = Vec::new();
    for seed in 0..5u64 {
        let data = make_blobs(10, 100, 10, 0.15, seed).map_err(|e| e.to_string())?;
        for bias in [false, true] {
            let net = EmbeddingNet::new(&[10, 32, 32, 2], &mut Rng::new(seed)).map_err(|e| e.to_string())?;
            let loss = LossConfig::new(LossKind::BaselineSoftmax).with_bias(bias);
            let cfg = TrainConfig {
                loss,
                lr: 0.05,
                batch_size: 100,
                iterations: 3000,
                seed,
                ..TrainConfig::default()
            };
            let r = train(net, &data, &cfg).map_err(|e| e.to_string())?;
            let f = r.model.embed(&data.samples).map_err(|e| e.to_string())?;
            if bias {
                if !near_origin_classes(&f, &data.labels, 10, PATHOLOGY_RATIO).is_empty() {
                    flagged.push(seed);
                }
            } else {
                radial.push(radialness(&f, &data.labels, 10));
            }
        }
    }
    within(t.elapsed(), Duration::from_secs(300))?;
    let lowest = radial.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(lowest >= 0.9, || format!("radialness {radial:?}"))?;
    ensure(!flagged.is_empty(), || "no bias-enabled seed produced a near-origin cluster".into())?;
    Ok(format!(
        "lowest no-bias radialness {lowest:.3}; near-origin cluster with bias in seeds {flagged:?}"
    ))
}

fn benchmark_directions() -> Result<String, String> {
    let (mut norm, mut base) = (0.0, 0.0);
    for seed in 0..5 {
        let r = embedding_pair_benchmark(seed).map_err(|e| e.to_string())?;
        norm += r.normalized / 5.0;
        base += r.baseline / 5.0;
    }
    ensure(norm >= base, || format!("normalized {norm:.4} < baseline {base:.4}"))?;
    let (mut svm, mut mean) = (0.0, 0.0);
    for seed in 0..5 {
        let pairs = synthetic_video_pairs(500, &VideoSimConfig::default(), &mut Rng::new(seed));
        let r = video_kfold(&pairs, 10, &SvmOptions::default()).map_err(|e| e.to_string())?;
        svm += r.svm.mean / 5.0;
        mean += r.mean_score.mean / 5.0;
    }
    let margin = 100.0 * (svm - mean);
    ensure(margin >= 1.0, || format!("HIK-SVM margin {margin:.2} points"))?;
    Ok(format!(
        "pair accuracy normalized {norm:.4} vs baseline {base:.4}; video HIK-SVM {svm:.4} vs mean-score {mean:.4} (+{margin:.1} pts)"
    ))
}

fn evaluation_oracles() -> Result<String, String> {
    let mut rng = Rng::new(12);
    for inst in 0..200 {
        let n = 10 + rng.index(191);
        let k = 2 + rng.index(9);
        let labels: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&y| ((rng.gaussian(if y { 0.3 } else { 0.0 }, 0.3)) * 20.0).round() / 20.0)
            .collect();
        let folds: Vec<usize> = (0..n).map(|i| i % k).collect();
        let got = kfold_from_scores(&scores, &labels, &folds, k).map_err(|e| e.to_string())?;
        for (f, (t, acc)) in got.folds.iter().zip(common::brute_force_kfold(&scores, &labels, k)) {
            ensure(f.threshold == t && f.accuracy == acc, || format!("instance {inst}, fold {}", f.fold))?;
        }
    }
    let mut min_eig = f64::INFINITY;
    for _ in 0..200 {
        let m = 2 + rng.index(19);
        let hists: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let c = rng.uniform_range(-0.9, 0.9);
                let len = 1 + rng.index(80);
                ScoreHistogram::from_scores((0..len).map(|_| rng.gaussian(c, 0.25))).normalized()
            })
            .collect();
        let e = symmetric_eigen(&gram_matrix(&hists)).map_err(|e| e.to_string())?;
        min_eig = min_eig.min(*e.values.last().unwrap());
    }
    ensure(min_eig >= -1e-9, || format!("min eigenvalue {min_eig:.3e}"))?;
    let mut worst = 0.0f64;
    for inst in 0..60 {
        let n = 2 + rng.index(7);
        let mut hists = Vec::new();
        let mut y = Vec::new();
        for t in 0..n {
            let same = t % 2 == 0;
            let c = if same { 0.5 } else { 0.1 } + rng.gaussian(0.0, 0.2);
            let len = 3 + rng.index(20);
            hists.push(ScoreHistogram::from_scores((0..len).map(|_| rng.gaussian(c, 0.15))).normalized());
            y.push(if same { 1.0 } else { -1.0 });
        }
        let gram = gram_matrix(&hists);
        let c = [0.1, 1.0, 10.0][inst % 3];
        let sol = solve_dual(&gram, &y, &SvmOptions { c, ..SvmOptions::default() }).map_err(|e| e.to_string())?;
        let got = dual_objective(&gram, &y, &sol.alpha);
        let want = common::brute_force_dual(&gram, &y, c);
        let err = (got - want).abs() / want.abs().max(1.0);
        ensure(err <= 1e-6, || format!("instance {inst}: smo {got} vs enumeration {want}"))?;
        worst = worst.max(err);
    }
    Ok(format!(
        "200 k-fold instances exact; min Gram eigenvalue {min_eig:.2e}; 60 SVM duals within {worst:.1e}"
    ))
}

fn main() -> ExitCode {
    let checks: [(u32, &str, Check); 12] = [
        (1, "loss-floor bound value", bound_value),
        (2, "extreme-case probabilities", extreme_probabilities),
        (3, "gradient suite", gradient_suite),
        (4, "orthogonality and norm growth", orthogonality_and_growth),
        (5, "feature scaling raises the top probability", proposition1),
        (6, "loss-floor tightness", proposition2_tightness),
        (7, "convergence failure at s=1", convergence_failure),
        (8, "agent distortion bound", proposition3),
        (9, "cosine and Euclidean forms agree", equivalence),
        (10, "radial features and bias pathology", radial_distribution),
        (11, "synthetic benchmark directions", benchmark_directions),
        (12, "evaluation oracles", evaluation_oracles),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
