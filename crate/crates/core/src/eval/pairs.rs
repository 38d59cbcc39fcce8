use crate::error::{Error, Result};
use crate::linalg::{dot, l2_norm, pca_fit, Matrix};

/// Element-wise sum of a feature and the feature of its mirrored image.
pub fn mirror_merge(f_orig: &[f64], f_mirror: &[f64]) -> Result<Vec<f64>> {
    if f_orig.len() != f_mirror.len() {
        return Err(Error::dims("mirror_merge", f_orig.len(), f_mirror.len()));
    }
    Ok(f_orig.iter().zip(f_mirror).map(|(a, b)| a + b).collect())
}

/// Row-wise [`mirror_merge`] of two feature stores.
pub fn mirror_merge_rows(orig: &Matrix, mirror: &Matrix) -> Result<Matrix> {
    if orig.shape() != mirror.shape() {
        return Err(Error::InvalidArgument(format!(
            "mirror store shape {:?} differs from {:?}",
            mirror.shape(),
            orig.shape()
        )));
    }
    let mut out = orig.clone();
    out.axpy(1.0, mirror);
    Ok(out)
}

/// Cosine similarity with ε-guarded norms, clamped to `[-1, 1]`.
pub fn cosine_score(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (l2_norm(a) * l2_norm(b))).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub same: bool,
}

/// Verification pairs with a `k`-way fold assignment (`fold = index mod k`).
#[derive(Debug, Clone)]
pub struct PairSet {
    pairs: Vec<FeaturePair>,
    k: usize,
}

impl PairSet {
    pub fn new(pairs: Vec<FeaturePair>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need k >= 2 folds, got {k}")));
        }
        if pairs.len() < k {
            return Err(Error::InvalidArgument(format!(
                "{} pairs cannot fill {k} non-empty folds",
                pairs.len()
            )));
        }
        let d = pairs[0].a.len();
        if let Some(p) = pairs.iter().find(|p| p.a.len() != d || p.b.len() != d) {
            return Err(Error::dims("PairSet", d, if p.a.len() != d { p.a.len() } else { p.b.len() }));
        }
        Ok(Self { pairs, k })
    }

    /// Builds pairs from `(row_a, row_b, same)` index triples into `features`.
    pub fn from_store(features: &Matrix, list: &[(usize, usize, bool)], k: usize) -> Result<Self> {
        let pairs = list
            .iter()
            .map(|&(a, b, same)| {
                let n = features.rows();
                if a >= n || b >= n {
                    return Err(Error::InvalidArgument(format!(
                        "pair ({a}, {b}) references a row beyond the {n}-row store"
                    )));
                }
                Ok(FeaturePair {
                    a: features.row(a).to_vec(),
                    b: features.row(b).to_vec(),
                    same,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs, k)
    }

    pub fn pairs(&self) -> &[FeaturePair] {
        &self.pairs
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn fold_of(&self, i: usize) -> usize {
        i % self.k
    }

    pub fn folds(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.fold_of(i)).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.pairs.iter().map(|p| p.same).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| cosine_score(&p.a, &p.b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub threshold: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KFoldResult {
    pub mean: f64,
    /// Sample standard deviation of the fold accuracies over `sqrt(k)`.
    pub stderr: f64,
    pub folds: Vec<FoldResult>,
}

/// Fraction of pairs classified correctly when "same" means `score > t`.
pub fn accuracy_at(scores: &[f64], labels: &[bool], t: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let hits = scores.iter().zip(labels).filter(|(&s, &y)| (s > t) == y).count();
    hits as f64 / scores.len() as f64
}

/// Candidate thresholds: one below every score, the midpoints between
/// adjacent distinct scores, and one above every score. Ascending.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let (Some(&lo), Some(&hi)) = (s.first(), s.last()) else {
        return vec![0.0];
    };
    let mut out = Vec::with_capacity(s.len() + 1);
    out.push(lo - 1.0);
    out.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(hi + 1.0);
    out
}

/// Accuracy-maximizing candidate threshold; ties go to the lowest one.
/// One sort plus a linear sweep.
pub fn best_threshold(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let cands = threshold_candidates(scores);
    // below every score all pairs are called "same"
    let mut correct = labels.iter().filter(|&&y| y).count() as i64;
    let (mut best, mut best_t) = (correct, cands[0]);
    let mut pos = 0;
    for &t in &cands[1..] {
        while pos < order.len() && scores[order[pos]] < t {
            correct += if labels[order[pos]] { -1 } else { 1 };
            pos += 1;
        }
        if correct > best {
            best = correct;
            best_t = t;
        }
    }
    best_t
}

/// k-fold accuracy from precomputed scores and fold ids.
pub fn kfold_from_scores(scores: &[f64], labels: &[bool], folds: &[usize], k: usize) -> Result<KFoldResult> {
    if scores.len() != labels.len() || scores.len() != folds.len() {
        return Err(Error::dims("kfold_from_scores", scores.len(), labels.len().min(folds.len())));
    }
    let mut results = Vec::with_capacity(k);
    for fold in 0..k {
        let (mut tr_s, mut tr_y, mut te_s, mut te_y) = (vec![], vec![], vec![], vec![]);
        for ((&s, &y), &f) in scores.iter().zip(labels).zip(folds) {
            if f == fold {
                te_s.push(s);
                te_y.push(y);
            } else {
                tr_s.push(s);
                tr_y.push(y);
            }
        }
        if te_s.is_empty() {
            return Err(Error::InvalidArgument(format!("fold {fold} is empty")));
        }
        let threshold = best_threshold(&tr_s, &tr_y);
        results.push(FoldResult {
            fold,
            threshold,
            accuracy: accuracy_at(&te_s, &te_y, threshold),
        });
    }
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let (mean, stderr) = mean_stderr(&accs);
    Ok(KFoldResult {
        mean,
        stderr,
        folds: results,
    })
}

pub(crate) fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// k-fold verification accuracy. With `pca_keep`, a PCA is fitted on the
/// training folds' features and applied to every pair before scoring.
pub fn kfold_accuracy(pairs: &PairSet, pca_keep: Option<usize>) -> Result<KFoldResult> {
    let labels = pairs.labels();
    let folds = pairs.folds();
    let Some(keep) = pca_keep else {
        return kfold_from_scores(&pairs.scores(), &labels, &folds, pairs.k());
    };
    let mut results = Vec::with_capacity(pairs.k());
    for fold in 0..pairs.k() {
        let train_rows: Vec<&[f64]> = pairs
            .pairs()
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f != fold)
            .flat_map(|(p, _)| [&p.a[..], &p.b[..]])
            .collect();
        let model = pca_fit(&Matrix::from_rows(&train_rows)?, keep)?;
        let scores = pairs
            .pairs()
            .iter()
            .map(|p| Ok(cosine_score(&model.apply(&p.a)?, &model.apply(&p.b)?)))
            .collect::<Result<Vec<_>>>()?;
        // reuse the plain routine and keep only this fold's row
        let r = kfold_from_scores(&scores, &labels, &folds, pairs.k())?;
        results.push(r.folds[fold].clone());
    }
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let (mean, stderr) = mean_stderr(&accs);
    Ok(KFoldResult {
        mean,
        stderr,
        folds: results,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarPoint {
    pub far: f64,
    pub threshold: f64,
    pub tpr: f64,
}

/// True-positive rate at the smallest negative-pair score whose
/// false-accept rate (`score > t`) is at most `far`.
pub fn tpr_at_far(scores: &[f64], labels: &[bool], far: f64) -> Result<FarPoint> {
    if !(far > 0.0 && far < 1.0) {
        return Err(Error::InvalidArgument(format!("far must lie in (0, 1), got {far}")));
    }
    if scores.len() != labels.len() {
        return Err(Error::dims("tpr_at_far", scores.len(), labels.len()));
    }
    let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| !y).map(|(&s, _)| s).collect();
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
    if pos.is_empty() {
        return Err(Error::InvalidArgument("tpr_at_far needs at least one positive pair".into()));
    }
    let n = neg.len();
    let min_far = if n == 0 { 1.0 } else { 1.0 / n as f64 };
    if far < min_far {
        return Err(Error::FarUnresolvable {
            requested: far,
            min_far,
            negatives: n,
        });
    }
    neg.sort_by(f64::total_cmp);
    // at t = neg[i], exactly the negatives strictly above neg[i] are accepted
    let threshold = (0..n)
        .map(|i| neg[i])
        .find(|&t| {
            let above = n - neg.partition_point(|&s| s <= t);
            above as f64 / n as f64 <= far
        })
        .expect("the largest negative always has zero false accepts");
    let tp = pos.iter().filter(|&&s| s > threshold).count();
    Ok(FarPoint {
        far,
        threshold,
        tpr: tp as f64 / pos.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use proptest::prelude::*;

    #[test]
    fn mirror_merge_cases() {
        let f = [1.0, -2.0, 3.5];
        assert_eq!(mirror_merge(&f, &f).unwrap(), vec![2.0, -4.0, 7.0]);
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        assert_eq!(mirror_merge(&f, &neg).unwrap(), vec![0.0; 3]);
        assert!(mirror_merge(&f, &[1.0]).is_err());
    }

    #[test]
    fn cosine_cases() {
        let v = [0.3, -1.2, 2.0];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine_score(&v, &v) - 1.0).abs() < 1e-12);
        assert!((cosine_score(&v, &neg) + 1.0).abs() < 1e-12);
        assert!((cosine_score(&[1.0, 0.0], &[1.0, 1.0]) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cosine_is_bounded_and_symmetric(seed in any::<u64>(), d in 1usize..10, scale in 1e-8f64..1e8) {
            let mut rng = Rng::new(seed);
            let a: Vec<f64> = rng.normal_vec(d).into_iter().map(|x| x * scale).collect();
            let b = rng.normal_vec(d);
            let s = cosine_score(&a, &b);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
            prop_assert_eq!(s, cosine_score(&b, &a));
        }

        #[test]
        fn merge_matches_elementwise_sum(seed in any::<u64>(), d in 0usize..16) {
            let mut rng = Rng::new(seed);
            let (a, b) = (rng.normal_vec(d), rng.normal_vec(d));
            let m = mirror_merge(&a, &b).unwrap();
            for i in 0..d {
                prop_assert_eq!(m[i], a[i] + b[i]);
            }
        }
    }

    #[test]
    fn separable_scores_give_perfect_accuracy() {
        let scores: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 0.8 + i as f64 * 1e-3 } else { -0.2 - i as f64 * 1e-3 }).collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let folds: Vec<usize> = (0..40).map(|i| i % 10).collect();
        let r = kfold_from_scores(&scores, &labels, &folds, 10).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn ties_go_to_the_lowest_threshold() {
        let t = best_threshold(&[0.0, 1.0], &[false, false]);
        assert_eq!(t, 2.0);
        // -1 and 2 are both 50% accurate
        let t = best_threshold(&[0.0, 1.0], &[true, false]);
        assert_eq!(t, -1.0);
    }

    #[test]
    fn far_edge_cases() {
        let scores = [0.9, 0.8, 0.1, 0.2, 0.0];
        let labels = [true, true, false, false, false];
        assert_eq!(tpr_at_far(&scores, &labels, 0.5).unwrap().tpr, 1.0);
        let same = [0.3; 6];
        let labels = [true, true, true, false, false, false];
        assert_eq!(tpr_at_far(&same, &labels, 0.5).unwrap().tpr, 0.0);
        match tpr_at_far(&same, &labels, 0.1) {
            Err(Error::FarUnresolvable { min_far, negatives, .. }) => {
                assert_eq!(negatives, 3);
                assert!((min_far - 1.0 / 3.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert!(tpr_at_far(&same, &labels, 1.0).is_err());
    }

    #[test]
    fn fold_sizes_are_validated() {
        let p = FeaturePair { a: vec![1.0], b: vec![1.0], same: true };
        assert!(PairSet::new(vec![p.clone(); 3], 4).is_err());
        assert!(PairSet::new(vec![p.clone(); 3], 1).is_err());
        assert_eq!(PairSet::new(vec![p; 5], 2).unwrap().folds(), vec![0, 1, 0, 1, 0]);
    }
}
