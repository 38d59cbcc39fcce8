//! Versioned binary bundle of named matrices.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"HEMB"
//! version u32 (= 1)
//! count   u32
//! count × { name_len u32, name utf8, rows u64, cols u64, rows*cols × f64 }
//! ```
//!
//! Snapshots and feature stores both use this format; values round-trip
//! bit-exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 4] = b"HEMB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    entries: Vec<(String, Matrix)>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.entries.push((name.into(), m));
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn entries(&self) -> &[(String, Matrix)] {
        &self.entries
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, m) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4, "magic")? != MAGIC {
            return Err(r.error("magic", "not a matrix bundle"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(r.error("version", format!("unsupported version {version}")));
        }
        let count = r.u32("entry count")?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = r.u32("name length")? as usize;
            let name = String::from_utf8(r.take(len, "name")?.to_vec())
                .map_err(|e| r.error("name", e.to_string()))?;
            let rows = r.u64("rows")? as usize;
            let cols = r.u64("cols")? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some())
                .ok_or_else(|| r.error("shape", format!("{rows}x{cols} overflows")))?;
            let raw = r.take(n * 8, "matrix data")?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let m = Matrix::from_vec(rows, cols, data).map_err(|e| r.error("matrix data", e.to_string()))?;
            entries.push((name, m));
        }
        if r.pos != bytes.len() {
            return Err(r.error("trailer", format!("{} unexpected trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// A feature store is a bundle with one `features` matrix, one row per id.
pub fn save_features(path: &Path, features: &Matrix) -> Result<()> {
    let mut b = Bundle::new();
    b.push("features", features.clone());
    b.save(path)
}

pub fn load_features(path: &Path) -> Result<Matrix> {
    Bundle::load(path)?
        .get("features")
        .cloned()
        .ok_or_else(|| Error::Format {
            path: path.into(),
            field: "features",
            detail: "entry missing".into(),
        })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn error(&self, field: &'static str, detail: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.into(),
            field,
            detail: detail.into(),
        }
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error(field, "truncated")),
        }
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}
