//! Classification datasets: seeded Gaussian blobs, CSV ingestion and
//! stratified train/validation splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{norm2, Matrix};
use crate::rng;

/// Rejection-sampling attempts for blob centers.
pub const CENTER_ATTEMPTS: usize = 1000;
/// Minimum center separation in units of `spread`.
pub const MIN_CENTER_SEPARATION: f64 = 4.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("could not place centers {min_distance} apart after {attempts} attempts")]
    CenterPlacementFailure { attempts: usize, min_distance: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("parse error at row {row}, column {column}: {text:?}")]
    ParseError { row: usize, column: usize, text: String },
    #[error("labels must be contiguous from 0; found {found:?}")]
    LabelRange { found: Vec<usize> },
    #[error("class {class} has {count} examples; at least 2 are needed to split")]
    TooFewExamples { class: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self, DataError> {
        if features.rows() != labels.len() {
            return Err(DataError::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(DataError::InvalidArgument(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows `indices`, in that order.
    ///
    /// # Panics
    ///
    /// If `indices` is empty or out of range.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let dims = self.dims();
        let features = Matrix::from_fn(indices.len(), dims, |i, j| self.features.get(indices[i], j));
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Features followed by the label as the last column, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, label) in self.labels.iter().enumerate() {
            for x in self.features.row(i) {
                out.push_str(&x.to_string());
                out.push(',');
            }
            out.push_str(&label.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_csv()).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// `classes` isotropic Gaussian clusters of `n_per_class` points each.
///
/// Centers are drawn from `N(0, I)` and redrawn until every pair is at least
/// `4 · spread` apart. Examples are ordered by class.
pub fn gen_blobs(
    seed: u64,
    n_per_class: usize,
    classes: usize,
    dims: usize,
    spread: f64,
) -> Result<Dataset, DataError> {
    if n_per_class == 0 || classes == 0 || dims == 0 {
        return Err(DataError::InvalidArgument(
            "n_per_class, classes and dims must be positive".into(),
        ));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "spread must be positive, got {spread}"
        )));
    }
    let mut centers_rng = rng::stream(seed, 0);
    let min_distance = MIN_CENTER_SEPARATION * spread;
    let mut centers = None;
    for _ in 0..CENTER_ATTEMPTS {
        let cand = rng::gaussian_matrix(&mut centers_rng, classes, dims, 1.0);
        let separated = (0..classes).all(|a| {
            ((a + 1)..classes).all(|b| {
                let d: Vec<f64> = cand.row(a).iter().zip(cand.row(b)).map(|(x, y)| x - y).collect();
                norm2(&d) >= min_distance
            })
        });
        if separated {
            centers = Some(cand);
            break;
        }
    }
    let centers = centers.ok_or(DataError::CenterPlacementFailure {
        attempts: CENTER_ATTEMPTS,
        min_distance,
    })?;

    let mut noise = rng::stream(seed, 1);
    let n = n_per_class * classes;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        for _ in 0..n_per_class {
            for &mu in centers.row(c) {
                let z: f64 = StandardNormal.sample(&mut noise);
                data.push(mu + spread * z);
            }
            labels.push(c);
        }
    }
    let features = Matrix::new(n, dims, data).expect("finite blob samples");
    Dataset::new(features, labels, classes)
}

/// Reads a numeric CSV; `label_column` is 0-based.
///
/// Error locations are 1-based: `row` counts data rows (the header, if any,
/// is not counted) and `column` counts fields.
pub fn load_csv(path: &Path, label_column: usize, has_header: bool) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        if label_column >= record.len() {
            return Err(DataError::InvalidArgument(format!(
                "label column {label_column} out of range for row {} with {} fields",
                r + 1,
                record.len()
            )));
        }
        width.get_or_insert(record.len());
        for (c, field) in record.iter().enumerate() {
            let parse_err = || DataError::ParseError {
                row: r + 1,
                column: c + 1,
                text: field.to_string(),
            };
            let x: f64 = field.parse().map_err(|_| parse_err())?;
            if !x.is_finite() {
                return Err(parse_err());
            }
            if c == label_column {
                if x < 0.0 || x.fract() != 0.0 {
                    return Err(parse_err());
                }
                labels.push(x as usize);
            } else {
                features.push(x);
            }
        }
    }
    let width = width.ok_or_else(|| DataError::InvalidArgument("CSV has no data rows".into()))?;
    if width < 2 {
        return Err(DataError::InvalidArgument(
            "CSV needs a label and at least one feature".into(),
        ));
    }

    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.iter().enumerate().any(|(i, &l)| i != l) {
        return Err(DataError::LabelRange { found: distinct });
    }
    let num_classes = distinct.len();
    let features =
        Matrix::new(labels.len(), width - 1, features).map_err(|e| DataError::InvalidArgument(e.to_string()))?;
    Dataset::new(features, labels, num_classes)
}

/// Stratified split: within each class a seeded shuffle picks
/// `round(count · val_fraction)` validation examples (at least one, and at
/// least one left for training). Both halves keep the original row order.
pub fn split(ds: &Dataset, val_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "val_fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng::stream(seed, 2);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(DataError::TooFewExamples {
                class,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let n_val = ((idx.len() as f64 * val_fraction).round() as usize).clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&val)))
}
