use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    SyntheticBlobs,
    MnistIdx,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub source: DataSource,
}

impl Dataset {
    pub fn new(samples: Matrix, labels: Vec<usize>, classes: usize, source: DataSource) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        if samples.rows() != labels.len() {
            return Err(Error::dims("Dataset labels", samples.rows(), labels.len()));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self {
            samples,
            labels,
            classes,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: self.samples.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            source: self.source,
        }
    }

    /// Stratified split: the first `train_per_class` samples of every class
    /// (in a seeded shuffle) go to the first half.
    pub fn split_per_class(&self, train_per_class: usize, rng: &mut Rng) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut order);
        let mut seen = vec![0usize; self.classes];
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for i in order {
            let c = self.labels[i];
            if seen[c] < train_per_class {
                train.push(i);
            } else {
                test.push(i);
            }
            seen[c] += 1;
        }
        train.sort_unstable();
        test.sort_unstable();
        (self.subset(&train), self.subset(&test))
    }
}

/// `n_classes` isotropic Gaussian blobs with standard deviation `spread`,
/// centered on random points of the unit sphere in `R^d`. Samples are
/// grouped by class.
pub fn make_blobs(n_classes: usize, per_class: usize, d: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::InvalidArgument("blob dimension must be positive".into()));
    }
    if !(spread >= 0.0) {
        return Err(Error::InvalidArgument(format!("spread must be >= 0, got {spread}")));
    }
    let mut rng = Rng::new(seed);
    let centers: Vec<Vec<f64>> = (0..n_classes).map(|_| rng.unit_vector(d)).collect();
    let mut samples = Matrix::zeros(n_classes * per_class, d);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for (c, center) in centers.iter().enumerate() {
        for k in 0..per_class {
            let row = samples.row_mut(c * per_class + k);
            for (x, mu) in row.iter_mut().zip(center) {
                *x = mu + spread * rng.normal();
            }
            labels.push(c);
        }
    }
    Dataset::new(samples, labels, n_classes, DataSource::SyntheticBlobs)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path, field: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            path: path.into(),
            field,
            detail: "truncated header".into(),
        })
}

/// Parses an IDX image file (magic 2051). Pixels are scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            path: path.into(),
            field: "magic",
            detail: format!("expected {IDX_IMAGES_MAGIC} for images, found {magic}"),
        });
    }
    let count = be_u32(bytes, 4, path, "count")? as usize;
    let rows = be_u32(bytes, 8, path, "rows")? as usize;
    let cols = be_u32(bytes, 12, path, "cols")? as usize;
    let pixels = count * rows * cols;
    let body = &bytes[16..];
    if body.len() != pixels {
        return Err(Error::Format {
            path: path.into(),
            field: "pixel data",
            detail: format!("expected {pixels} bytes, found {}", body.len()),
        });
    }
    Matrix::from_vec(count, rows * cols, body.iter().map(|&p| p as f64 / 255.0).collect())
}

/// Parses an IDX label file (magic 2049).
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            path: path.into(),
            field: "magic",
            detail: format!("expected {IDX_LABELS_MAGIC} for labels, found {magic}"),
        });
    }
    let count = be_u32(bytes, 4, path, "count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Format {
            path: path.into(),
            field: "label data",
            detail: format!("expected {count} bytes, found {}", body.len()),
        });
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lab = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let samples = parse_idx_images(&img, images_path)?;
    let labels = parse_idx_labels(&lab, labels_path)?;
    if samples.rows() != labels.len() {
        return Err(Error::Format {
            path: labels_path.into(),
            field: "count",
            detail: format!("{} labels for {} images", labels.len(), samples.rows()),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    Dataset::new(samples, labels, classes, DataSource::MnistIdx)
}

/// Encodes images (values in `[0, 1]`, rounded to bytes) and labels as an
/// IDX pair. Handy for fixtures.
pub fn encode_idx(images: &Matrix, rows: usize, cols: usize, labels: &[usize]) -> (Vec<u8>, Vec<u8>) {
    assert_eq!(images.cols(), rows * cols);
    let mut img = Vec::with_capacity(16 + images.as_slice().len());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.rows() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend(images.as_slice().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend(labels.iter().map(|&l| l as u8));
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic() {
        let a = make_blobs(3, 100, 2, 0.1, 7).unwrap();
        let b = make_blobs(3, 100, 2, 0.1, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.len(), 300);
    }

    #[test]
    fn idx_round_trip_of_ten_images() {
        let images = Matrix::from_fn(10, 4, |i, j| ((i * 4 + j) % 256) as f64 / 255.0);
        let labels: Vec<usize> = (0..10).collect();
        let (img, lab) = encode_idx(&images, 2, 2, &labels);
        let p = Path::new("fixture");
        let m = parse_idx_images(&img, p).unwrap();
        assert_eq!(m.shape(), (10, 4));
        assert!(m.max_abs_diff(&images) < 1e-12);
        assert_eq!(parse_idx_labels(&lab, p).unwrap(), labels);
    }

    #[test]
    fn bad_magic_names_the_field() {
        let (mut img, mut lab) = encode_idx(&Matrix::zeros(1, 1), 1, 1, &[0]);
        img[..4].copy_from_slice(&0u32.to_be_bytes());
        lab[..4].copy_from_slice(&0u32.to_be_bytes());
        let e = parse_idx_images(&img, Path::new("x")).unwrap_err();
        assert!(matches!(e, Error::Format { field: "magic", .. }));
        let e = parse_idx_labels(&lab, Path::new("x")).unwrap_err();
        assert!(matches!(e, Error::Format { field: "magic", .. }));
    }

    #[test]
    fn truncated_pixels_are_rejected() {
        let (img, _) = encode_idx(&Matrix::zeros(3, 4), 2, 2, &[0, 0, 0]);
        let e = parse_idx_images(&img[..img.len() - 1], Path::new("x")).unwrap_err();
        assert!(matches!(e, Error::Format { field: "pixel data", .. }));
        let e = parse_idx_images(&img[..6], Path::new("x")).unwrap_err();
        assert!(matches!(e, Error::Format { field: "count", .. }));
    }

    #[test]
    fn dataset_validates_labels() {
        assert!(Dataset::new(Matrix::zeros(2, 1), vec![0, 3], 3, DataSource::SyntheticBlobs).is_err());
        assert!(Dataset::new(Matrix::zeros(2, 1), vec![0, 0], 1, DataSource::SyntheticBlobs).is_err());
        assert!(Dataset::new(Matrix::zeros(0, 1), vec![], 2, DataSource::SyntheticBlobs).is_ok());
    }

    #[test]
    fn stratified_split_counts() {
        let d = make_blobs(4, 10, 3, 0.2, 1).unwrap();
        let (tr, te) = d.split_per_class(6, &mut Rng::new(2));
        assert_eq!(tr.len(), 24);
        assert_eq!(te.len(), 16);
        for c in 0..4 {
            assert_eq!(tr.labels.iter().filter(|&&l| l == c).count(), 6);
        }
    }
}
