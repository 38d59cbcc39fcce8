//! Synthetic stand-ins for the verification benchmarks.

use crate::error::Result;
use crate::linalg::Rng;
use crate::losses::{LossConfig, LossKind, Scale};
use crate::trainer::{make_blobs, train, EmbeddingNet, TrainConfig};

use super::pairs::{kfold_accuracy, FeaturePair, PairSet};
use super::video::ScoreHistogram;
use super::VideoPair;

/// Knobs of the synthetic video-pair generator. Frame scores of matching
/// frames follow `N(same_mean, std)` for same-identity pairs and
/// `N(diff_mean, std)` otherwise. In same-identity pairs each frame is
/// independently occluded with a per-pair probability drawn from
/// `U(0, max_occlusion)`; any score involving an occluded frame follows
/// `N(occluded_mean, std)` instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoSimConfig {
    pub same_mean: f64,
    pub diff_mean: f64,
    pub std: f64,
    pub occluded_mean: f64,
    pub max_occlusion: f64,
    pub min_frames: usize,
    pub max_frames: usize,
}

impl Default for VideoSimConfig {
    fn default() -> Self {
        Self {
            same_mean: 0.6,
            diff_mean: 0.1,
            std: 0.1,
            occluded_mean: -0.1,
            max_occlusion: 0.6,
            min_frames: 4,
            max_frames: 10,
        }
    }
}

/// `n_pairs` video pairs, alternating same / different.
pub fn synthetic_video_pairs(n_pairs: usize, cfg: &VideoSimConfig, rng: &mut Rng) -> Vec<VideoPair> {
    (0..n_pairs)
        .map(|k| {
            let same = k % 2 == 0;
            let span = cfg.max_frames - cfg.min_frames + 1;
            let na = cfg.min_frames + rng.index(span);
            let nb = cfg.min_frames + rng.index(span);
            let p = if same { rng.uniform() * cfg.max_occlusion } else { 0.0 };
            let occ_a: Vec<bool> = (0..na).map(|_| rng.bernoulli(p)).collect();
            let occ_b: Vec<bool> = (0..nb).map(|_| rng.bernoulli(p)).collect();
            let mut scores = Vec::with_capacity(na * nb);
            for &oa in &occ_a {
                for &ob in &occ_b {
                    let mean = match (same, oa || ob) {
                        (false, _) => cfg.diff_mean,
                        (true, false) => cfg.same_mean,
                        (true, true) => cfg.occluded_mean,
                    };
                    scores.push(rng.gaussian(mean, cfg.std).clamp(-1.0, 1.0));
                }
            }
            VideoPair {
                mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
                histogram: ScoreHistogram::from_scores(scores),
                same,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingBenchResult {
    pub normalized: f64,
    pub baseline: f64,
}

/// Trains the same MLP with the plain softmax and with the scaled-cosine
/// softmax on Gaussian blobs, then scores 10-fold pair accuracy on held-out
/// samples of the same classes.
pub fn embedding_pair_benchmark(seed: u64) -> Result<EmbeddingBenchResult> {
    const CLASSES: usize = 20;
    const INPUT: usize = 20;
    let data = make_blobs(CLASSES, 60, INPUT, 0.2, seed)?;
    let mut rng = Rng::new(seed ^ 0x5eed);
    let (train_set, test_set) = data.split_per_class(40, &mut rng);

    let mut pairs = Vec::new();
    let by_class: Vec<Vec<usize>> = (0..CLASSES)
        .map(|c| (0..test_set.len()).filter(|&i| test_set.labels[i] == c).collect())
        .collect();
    for k in 0..600 {
        let same = k % 2 == 0;
        let ca = rng.index(CLASSES);
        let cb = if same { ca } else { (ca + 1 + rng.index(CLASSES - 1)) % CLASSES };
        let a = by_class[ca][rng.index(by_class[ca].len())];
        let mut b = by_class[cb][rng.index(by_class[cb].len())];
        while same && b == a {
            b = by_class[cb][rng.index(by_class[cb].len())];
        }
        pairs.push((a, b, same));
    }

    let run = |loss: LossConfig| -> Result<f64> {
        let net = EmbeddingNet::new(&[INPUT, 64, 16], &mut Rng::new(seed))?;
        let cfg = TrainConfig {
            loss,
            lr: 0.05,
            batch_size: 64,
            iterations: 1500,
            seed,
            ..TrainConfig::default()
        };
        let report = train(net, &train_set, &cfg)?;
        let features = report.model.embed(&test_set.samples)?;
        let set = PairSet::new(
            pairs
                .iter()
                .map(|&(a, b, same)| FeaturePair {
                    a: features.row(a).to_vec(),
                    b: features.row(b).to_vec(),
                    same,
                })
                .collect(),
            10,
        )?;
        Ok(kfold_accuracy(&set, None)?.mean)
    };
    Ok(EmbeddingBenchResult {
        normalized: run(LossConfig::new(LossKind::ScaledCosineSoftmax).with_scale(Scale::Learned(10.0)))?,
        baseline: run(LossConfig::new(LossKind::BaselineSoftmax))?,
    })
}
