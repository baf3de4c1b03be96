//! Synthetic dataset generators and benchmark-file loaders.
//!
//! Generators are pure functions of (parameters, seed) through [`SplitRng`],
//! so a dataset is reproducible from its provenance record alone. Loaders
//! accept delimited text (comma or whitespace, optional header) and the
//! sparse `label idx:val ...` format with 1-based indices; unparseable rows
//! are always an error, never silently dropped.

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::domain("matrix needs at least one row and column"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("ragged rows"));
        }
        let data = rows.into_iter().flatten().collect();
        Ok(DenseMatrix {
            rows: 0,
            cols,
            data,
        }
        .with_recomputed_rows())
    }

    fn with_recomputed_rows(mut self) -> Self {
        self.rows = self.data.len() / self.cols;
        self
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Squared Euclidean distance between rows i and j.
    pub fn row_dist2(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|v| !v.is_finite())
    }
}

/// Where a dataset came from; enough to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { seed: u64, generator: String },
    File { path: String, format: String },
}

/// An N x D feature matrix with a name and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub name: String,
    pub provenance: Provenance,
}

impl Dataset {
    fn new(x: DenseMatrix, name: impl Into<String>, provenance: Provenance) -> Result<Self> {
        if x.has_non_finite() {
            return Err(Error::domain("dataset contains NaN or infinite entries"));
        }
        Ok(Dataset {
            x,
            name: name.into(),
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// FNV-1a 64 over the dimensions and little-endian bytes of every entry.
    pub fn fingerprint(&self) -> u64 {
        fingerprint_matrix(&self.x)
    }

    /// Standardize each column to zero mean, unit variance (in place).
    /// Constant columns are left centered only.
    pub fn standardize(&mut self) {
        let (n, d) = (self.x.rows(), self.x.cols());
        for j in 0..d {
            let mean = (0..n).map(|i| self.x.get(i, j)).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (self.x.get(i, j) - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
            for i in 0..n {
                let v = self.x.get(i, j);
                self.x.set(i, j, (v - mean) * scale);
            }
        }
    }
}

/// FNV-1a 64-bit fingerprint of a matrix.
pub fn fingerprint_matrix(x: &DenseMatrix) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(&(x.rows() as u64).to_le_bytes());
    eat(&(x.cols() as u64).to_le_bytes());
    for v in x.data() {
        eat(&v.to_le_bytes());
    }
    h
}

/// n points uniform over the disc of the given radius (sqrt-radius polar
/// sampling), deterministic per seed.
pub fn gen_disc(n: usize, radius: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || !(radius > 0.0) {
        return Err(Error::domain("gen_disc needs n >= 1 and radius > 0"));
    }
    let mut rng = SplitRng::with_stream(seed, 0xD15C);
    let mut x = DenseMatrix::zeros(n, 2);
    for i in 0..n {
        let r = radius * rng.next_f64().sqrt();
        let theta = rng.next_range(0.0, 2.0 * std::f64::consts::PI);
        x.set(i, 0, r * theta.cos());
        x.set(i, 1, r * theta.sin());
    }
    Dataset::new(
        x,
        format!("disc_n{n}_r{radius}"),
        Provenance::Synthetic {
            seed,
            generator: format!("disc(n={n}, radius={radius})"),
        },
    )
}

/// Equal-weight Gaussian mixture with isotropic covariance var * I,
/// deterministic per seed.
pub fn gen_gmm(n: usize, means: &[Vec<f64>], var: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || means.is_empty() || !(var > 0.0) {
        return Err(Error::domain(
            "gen_gmm needs n >= 1, at least one component, var > 0",
        ));
    }
    let dim = means[0].len();
    if dim == 0 || means.iter().any(|m| m.len() != dim) {
        return Err(Error::domain("gen_gmm means must share a positive dimension"));
    }
    let sd = var.sqrt();
    let mut rng = SplitRng::with_stream(seed, 0x6333);
    let mut x = DenseMatrix::zeros(n, dim);
    for i in 0..n {
        let k = rng.next_index(means.len());
        for j in 0..dim {
            x.set(i, j, means[k][j] + sd * rng.next_normal());
        }
    }
    Dataset::new(
        x,
        format!("gmm_n{n}_k{}", means.len()),
        Provenance::Synthetic {
            seed,
            generator: format!("gmm(n={n}, components={}, var={var})", means.len()),
        },
    )
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Split a line on commas when any are present, else on whitespace.
fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Load a delimited text file, keep rows whose label equals
/// `majority_label`, drop the label column, parse the rest as features.
pub fn load_delimited(
    path: impl AsRef<Path>,
    has_header: bool,
    label_column: usize,
    majority_label: &str,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let path_str = path.display().to_string();
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || (has_header && idx == 0) {
            continue;
        }
        let fields = split_fields(line);
        if label_column >= fields.len() {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: line_no,
                message: format!(
                    "label column {label_column} out of range for {} fields",
                    fields.len()
                ),
            });
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: line_no,
                    message: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            _ => {}
        }
        if fields[label_column] != majority_label {
            continue;
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for (j, field) in fields.iter().enumerate() {
            if j == label_column {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                line: line_no,
                message: format!("field {j} ({field:?}) is not a number"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptySelection {
            path: path_str,
            label: majority_label.to_string(),
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::new(
        DenseMatrix::from_rows(rows)?,
        name,
        Provenance::File {
            path: path_str,
            format: "delimited".to_string(),
        },
    )
}

/// Load a sparse `label idx:val idx:val ...` file (1-based indices), keep
/// rows with the majority label, densify with zeros for absent indices.
/// The feature dimension is the largest index seen anywhere in the file.
pub fn load_sparse_indexed(path: impl AsRef<Path>, majority_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let path_str = path.display().to_string();
    let mut kept: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label = parts.next().ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            message: "missing label".to_string(),
        })?;
        let mut entries = Vec::new();
        for token in parts {
            let (idx_str, val_str) = token.split_once(':').ok_or_else(|| Error::Parse {
                path: path_str.clone(),
                line: line_no,
                message: format!("token {token:?} is not idx:val"),
            })?;
            let raw_index: i64 = idx_str.parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                line: line_no,
                message: format!("index {idx_str:?} is not an integer"),
            })?;
            if raw_index < 1 {
                return Err(Error::Index {
                    path: path_str.clone(),
                    line: line_no,
                    index: raw_index,
                });
            }
            let value: f64 = val_str.parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                line: line_no,
                message: format!("value {val_str:?} is not a number"),
            })?;
            let index = raw_index as usize;
            max_index = max_index.max(index);
            entries.push((index, value));
        }
        if label == majority_label {
            kept.push(entries);
        }
    }
    if kept.is_empty() || max_index == 0 {
        return Err(Error::EmptySelection {
            path: path_str,
            label: majority_label.to_string(),
        });
    }
    let mut x = DenseMatrix::zeros(kept.len(), max_index);
    for (i, entries) in kept.iter().enumerate() {
        for &(idx, val) in entries {
            x.set(i, idx - 1, val);
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::new(
        x,
        name,
        Provenance::File {
            path: path_str,
            format: "sparse_indexed".to_string(),
        },
    )
}

/// Median pairwise Euclidean distance, the default Gaussian kernel width
/// for real datasets. Rows beyond the first 2000 are ignored to bound the
/// quadratic cost; the subsample is deterministic (a prefix).
pub fn median_pairwise_distance(x: &DenseMatrix) -> f64 {
    let n = x.rows().min(2000);
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(x.row_dist2(i, j).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}
