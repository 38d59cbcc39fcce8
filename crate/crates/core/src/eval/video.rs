use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::pairs::cosine_score;

pub const HIST_BINS: usize = 100;
pub const HIST_LO: f64 = -1.0;
pub const HIST_HI: f64 = 1.0;

/// Counts of frame-pair cosine scores in 100 uniform bins over `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreHistogram {
    bins: Vec<u64>,
}

impl Default for ScoreHistogram {
    fn default() -> Self {
        Self {
            bins: vec![0; HIST_BINS],
        }
    }
}

/// Bin of `score`; values outside `[-1, 1]` are clamped, so `+1` lands in
/// the top bin.
pub fn bin_index(score: f64) -> usize {
    let t = (score - HIST_LO) / (HIST_HI - HIST_LO) * HIST_BINS as f64;
    (t.floor().max(0.0) as usize).min(HIST_BINS - 1)
}

pub fn bin_center(i: usize) -> f64 {
    HIST_LO + (i as f64 + 0.5) * (HIST_HI - HIST_LO) / HIST_BINS as f64
}

pub const BIN_WIDTH: f64 = (HIST_HI - HIST_LO) / HIST_BINS as f64;

impl ScoreHistogram {
    pub fn from_scores(scores: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Self::default();
        for s in scores {
            h.bins[bin_index(s)] += 1;
        }
        h
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// Bin counts divided by their total (all zeros for an empty histogram).
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; HIST_BINS];
        }
        self.bins.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Count-weighted mean of the bin centers.
    pub fn mean_estimate(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.bins
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * bin_center(i))
            .sum::<f64>()
            / total as f64
    }
}

fn check_videos(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::InvalidArgument("a video needs at least one frame feature".into()));
    }
    if a.cols() != b.cols() {
        return Err(Error::dims("video frames", a.cols(), b.cols()));
    }
    Ok(())
}

/// The `|a| x |b|` matrix of frame-pair cosine scores.
pub fn score_matrix(frames_a: &Matrix, frames_b: &Matrix) -> Result<Matrix> {
    check_videos(frames_a, frames_b)?;
    Ok(Matrix::from_fn(frames_a.rows(), frames_b.rows(), |i, j| {
        cosine_score(frames_a.row(i), frames_b.row(j))
    }))
}

/// Histogram of every frame-pair score between two videos.
pub fn video_histogram(frames_a: &Matrix, frames_b: &Matrix) -> Result<ScoreHistogram> {
    Ok(ScoreHistogram::from_scores(
        score_matrix(frames_a, frames_b)?.as_slice().iter().copied(),
    ))
}

/// The mean of the score matrix, the plain video similarity baseline.
pub fn mean_video_score(frames_a: &Matrix, frames_b: &Matrix) -> Result<f64> {
    let m = score_matrix(frames_a, frames_b)?;
    Ok(m.as_slice().iter().sum::<f64>() / m.as_slice().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    #[test]
    fn identical_single_frames_hit_the_top_bin() {
        let a = Matrix::from_rows(&[[0.3, 0.4]]).unwrap();
        let h = video_histogram(&a, &a).unwrap();
        assert_eq!(h.bins()[HIST_BINS - 1], 1);
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn orthogonal_frames_hit_the_zero_bin() {
        let a = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 2.0]]).unwrap();
        let h = video_histogram(&a, &b).unwrap();
        assert_eq!(h.bins()[bin_index(0.0)], 1);
        assert_eq!(bin_index(0.0), 50);
    }

    #[test]
    fn five_by_seven_matches_brute_force() {
        let mut rng = Rng::new(3);
        let a = rng.normal_matrix(5, 8, 1.0);
        let b = rng.normal_matrix(7, 8, 1.0);
        let h = video_histogram(&a, &b).unwrap();
        assert_eq!(h.total(), 35);
        let mut want = vec![0u64; HIST_BINS];
        for i in 0..5 {
            for j in 0..7 {
                let s = cosine_score(a.row(i), b.row(j));
                let k = (0..HIST_BINS)
                    .find(|&k| s < HIST_LO + (k + 1) as f64 * BIN_WIDTH || k == HIST_BINS - 1)
                    .unwrap();
                want[k] += 1;
            }
        }
        assert_eq!(h.bins(), &want[..]);
    }

    #[test]
    fn mean_is_recoverable_within_a_bin() {
        let mut rng = Rng::new(8);
        let a = rng.normal_matrix(6, 4, 1.0);
        let b = rng.normal_matrix(9, 4, 1.0);
        let h = video_histogram(&a, &b).unwrap();
        let m = mean_video_score(&a, &b).unwrap();
        assert!((h.mean_estimate() - m).abs() <= BIN_WIDTH);
    }

    #[test]
    fn empty_video_is_an_error() {
        assert!(video_histogram(&Matrix::zeros(0, 3), &Matrix::zeros(2, 3)).is_err());
    }
}
