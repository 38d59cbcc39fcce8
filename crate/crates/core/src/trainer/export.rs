use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};
use crate::losses::cosine;

use super::{Dataset, EmbeddingNet};

/// A class is flagged as collapsed toward the origin when its mean feature
/// is shorter than this fraction of the average feature norm.
pub const PATHOLOGY_RATIO: f64 = 0.2;

pub fn write_loss_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "loss"])?;
    for (i, v) in curve.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `feature_x,feature_y,label` rows for a 2-D net and returns the
/// features.
pub fn export_feature_scatter(net: &EmbeddingNet, data: &Dataset, path: &Path) -> Result<Matrix> {
    if net.feature_dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "scatter export needs 2-D features, net produces {}",
            net.feature_dim()
        )));
    }
    let features = if data.is_empty() {
        Matrix::zeros(0, 2)
    } else {
        net.embed(&data.samples)?
    };
    write_features_csv(path, &features, &data.labels)?;
    Ok(features)
}

pub fn write_features_csv(path: &Path, features: &Matrix, labels: &[usize]) -> Result<()> {
    if features.cols() != 2 {
        return Err(Error::dims("write_features_csv", 2, features.cols()));
    }
    let mut w = csv_writer(path)?;
    w.write_record(["feature_x", "feature_y", "label"])?;
    for (row, label) in features.row_iter().zip(labels) {
        w.write_record([row[0].to_string(), row[1].to_string(), label.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn class_means(features: &Matrix, labels: &[usize], classes: usize) -> Vec<Option<Vec<f64>>> {
    let mut sums = vec![vec![0.0; features.cols()]; classes];
    let mut counts = vec![0usize; classes];
    for (row, &y) in features.row_iter().zip(labels) {
        sums[y].iter_mut().zip(row).for_each(|(s, v)| *s += v);
        counts[y] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
        .collect()
}

/// Mean over samples of `|cos(f, class mean)|`; 1 means every class lies
/// on a ray from the origin.
pub fn radialness(features: &Matrix, labels: &[usize], classes: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let means = class_means(features, labels, classes);
    let total: f64 = features
        .row_iter()
        .zip(labels)
        .map(|(row, &y)| cosine(row, means[y].as_deref().unwrap()).abs())
        .sum();
    total / labels.len() as f64
}

/// Classes whose mean feature norm is below `ratio` times the average
/// per-sample feature norm.
pub fn near_origin_classes(features: &Matrix, labels: &[usize], classes: usize, ratio: f64) -> Vec<usize> {
    if labels.is_empty() {
        return Vec::new();
    }
    let avg_norm = features.row_iter().map(l2_norm).sum::<f64>() / labels.len() as f64;
    class_means(features, labels, classes)
        .into_iter()
        .enumerate()
        .filter_map(|(c, m)| m.filter(|m| l2_norm(m) < ratio * avg_norm).map(|_| c))
        .collect()
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}
