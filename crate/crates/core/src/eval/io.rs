use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::store::Bundle;

use super::pairs::{FarPoint, FoldResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEntry {
    pub a: String,
    pub b: String,
    pub same: bool,
}

/// Parses `id_a id_b label` lines; label is `1`/`0` (or `true`/`false`).
/// Blank lines and `#` comments are skipped.
pub fn parse_pair_list(text: &str, path: &Path) -> Result<Vec<PairEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |detail: String| Error::Format {
            path: path.into(),
            field: "pair line",
            detail: format!("line {}: {detail}", lineno + 1),
        };
        let [a, b, label] = fields[..] else {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        };
        let same = match label {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(format!("label must be 0 or 1, found {other:?}"))),
        };
        out.push(PairEntry {
            a: a.to_string(),
            b: b.to_string(),
            same,
        });
    }
    Ok(out)
}

pub fn load_pair_list(path: &Path) -> Result<Vec<PairEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pair_list(&text, path)
}

/// Interprets pair ids as row indices into a feature store.
pub fn pair_rows(entries: &[PairEntry], rows: usize, path: &Path) -> Result<Vec<(usize, usize, bool)>> {
    let row = |id: &str| -> Result<usize> {
        id.parse::<usize>()
            .ok()
            .filter(|&r| r < rows)
            .ok_or_else(|| Error::Format {
                path: path.into(),
                field: "pair id",
                detail: format!("{id:?} is not a row index below {rows}"),
            })
    };
    entries.iter().map(|e| Ok((row(&e.a)?, row(&e.b)?, e.same))).collect()
}

/// Looks up each pair's videos (bundle entries keyed by video id).
pub fn video_pairs<'a>(entries: &[PairEntry], videos: &'a Bundle, path: &Path) -> Result<Vec<(&'a Matrix, &'a Matrix, bool)>> {
    let get = |id: &str| {
        videos.get(id).ok_or_else(|| Error::Format {
            path: path.into(),
            field: "video id",
            detail: format!("{id:?} not found in the video store"),
        })
    };
    entries.iter().map(|e| Ok((get(&e.a)?, get(&e.b)?, e.same))).collect()
}

pub fn write_fold_results(path: &Path, folds: &[FoldResult]) -> Result<()> {
    let mut w = crate::trainer::csv_writer(path)?;
    w.write_record(["fold", "threshold", "accuracy"])?;
    for f in folds {
        w.write_record([f.fold.to_string(), f.threshold.to_string(), f.accuracy.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per requested FAR; unresolvable ones carry an empty `tpr`.
pub fn write_far_tpr(path: &Path, points: &[(f64, Option<FarPoint>)]) -> Result<()> {
    let mut w = crate::trainer::csv_writer(path)?;
    w.write_record(["far", "tpr"])?;
    for (far, p) in points {
        w.write_record([far.to_string(), p.as_ref().map(|p| p.tpr.to_string()).unwrap_or_default()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_rejects_bad_labels() {
        let p = Path::new("pairs.txt");
        let got = parse_pair_list("# header\n0 1 1\n\n2 3 0\n", p).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got[0].same && !got[1].same);
        assert!(parse_pair_list("0 1 2\n", p).is_err());
        assert!(parse_pair_list("0 1\n", p).is_err());
        let rows = pair_rows(&got, 4, p).unwrap();
        assert_eq!(rows, vec![(0, 1, true), (2, 3, false)]);
        assert!(pair_rows(&got, 3, p).is_err());
    }
}
