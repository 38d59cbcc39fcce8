//! Verification protocols: pair scoring, k-fold accuracy, TPR@FAR and
//! video-pair classification from score histograms.

mod io;
mod pairs;
mod svm;
mod synthetic;
mod video;

pub use io::{load_pair_list, pair_rows, parse_pair_list, video_pairs, write_far_tpr, write_fold_results, PairEntry};
pub use pairs::{
    accuracy_at, best_threshold, cosine_score, kfold_accuracy, kfold_from_scores, mirror_merge, mirror_merge_rows,
    threshold_candidates, tpr_at_far, FarPoint, FeaturePair, FoldResult, KFoldResult, PairSet,
};
pub use svm::{
    dual_objective, gram_matrix, hik_kernel, hik_svm_predict, hik_svm_train, hik_svm_train_with, solve_dual,
    DualSolution, HikSvmModel, SvmOptions, DEFAULT_C, DEFAULT_TOL,
};
pub use synthetic::{embedding_pair_benchmark, synthetic_video_pairs, EmbeddingBenchResult, VideoSimConfig};
pub use video::{
    bin_center, bin_index, mean_video_score, score_matrix, video_histogram, ScoreHistogram, BIN_WIDTH, HIST_BINS,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A video pair reduced to what the two classifiers see.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoPair {
    pub histogram: ScoreHistogram,
    pub mean_score: f64,
    pub same: bool,
}

impl VideoPair {
    pub fn from_frames(frames_a: &Matrix, frames_b: &Matrix, same: bool) -> Result<Self> {
        Ok(Self {
            histogram: video_histogram(frames_a, frames_b)?,
            mean_score: mean_video_score(frames_a, frames_b)?,
            same,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoEvalResult {
    pub svm: KFoldResult,
    pub mean_score: KFoldResult,
}

/// k-fold comparison of the HIK-SVM against thresholding the mean score,
/// on identical folds (`fold = index mod k`).
pub fn video_kfold(pairs: &[VideoPair], k: usize, opts: &SvmOptions) -> Result<VideoEvalResult> {
    if k < 2 || pairs.len() < k {
        return Err(Error::InvalidArgument(format!("{} video pairs cannot fill {k} folds", pairs.len())));
    }
    let labels: Vec<bool> = pairs.iter().map(|p| p.same).collect();
    let folds: Vec<usize> = (0..pairs.len()).map(|i| i % k).collect();
    let means: Vec<f64> = pairs.iter().map(|p| p.mean_score).collect();
    let mean_score = kfold_from_scores(&means, &labels, &folds, k)?;

    let mut results = Vec::with_capacity(k);
    for fold in 0..k {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (p, &f) in pairs.iter().zip(&folds) {
            if f == fold {
                test.push(p);
            } else {
                train.push(p);
            }
        }
        let hists: Vec<ScoreHistogram> = train.iter().map(|p| p.histogram.clone()).collect();
        let ys: Vec<bool> = train.iter().map(|p| p.same).collect();
        let model = hik_svm_train_with(&hists, &ys, opts)?;
        let hits = test.iter().filter(|p| hik_svm_predict(&model, &p.histogram) == p.same).count();
        results.push(FoldResult {
            fold,
            threshold: model.bias,
            accuracy: hits as f64 / test.len() as f64,
        });
    }
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let (mean, stderr) = pairs::mean_stderr(&accs);
    Ok(VideoEvalResult {
        svm: KFoldResult {
            mean,
            stderr,
            folds: results,
        },
        mean_score,
    })
}
