//! Datasets, splits, scalers and evaluation metrics.
//!
//! Everything here is immutable once constructed. A [`Dataset`] validates its
//! invariants on construction (finite entries, unique feature names, labels in
//! `1..=C` for classification), so downstream code never re-checks them.

mod io;
mod metrics;
mod scaler;
mod split;

pub use io::{
    load_csv, load_csv_with_task, read_feature_table, read_sidecar, write_csv, write_sidecar,
    FeatureTable, TaskSidecar, ROW_ID_COLUMN,
};
pub use metrics::{
    classification_metrics, cross_entropy, expected_calibration_error, macro_f1,
    regression_metrics, MetricReport, ECE_BINS,
};
pub use metrics::argmax;
pub use scaler::{fit_scaler, ScalerKind, ScalerStats};
pub use split::{make_split, Split, SplitSpec, SplitStrategy};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row}: label {value} is not a class in 1..={num_classes}")]
    InvalidLabel {
        row: usize,
        value: f64,
        num_classes: usize,
    },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("row {row}: probabilities do not sum to 1")]
    NotSimplex { row: usize },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if rows * cols != data.len() {
            return Err(DataError::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, DataError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(DataError::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so guard zero-width matrices.
        let width = self.cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { num_classes: usize },
}

impl Task {
    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self {
            Task::Regression => None,
            Task::Classification { num_classes } => Some(*num_classes),
        }
    }
}

/// Supervised dataset: `N x d` features, targets and task kind.
///
/// Classification targets are stored as `f64` labels in `1..=C`; use
/// [`Dataset::class_index`] for the zero-based class position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    feature_names: Vec<String>,
    targets: Vec<f64>,
    task: Task,
    row_ids: Vec<u64>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        feature_names: Vec<String>,
        targets: Vec<f64>,
        task: Task,
    ) -> Result<Self, DataError> {
        let row_ids = (0..features.rows() as u64).collect();
        Self::with_row_ids(features, feature_names, targets, task, row_ids)
    }

    pub fn with_row_ids(
        features: Matrix,
        feature_names: Vec<String>,
        targets: Vec<f64>,
        task: Task,
        row_ids: Vec<u64>,
    ) -> Result<Self, DataError> {
        let (n, d) = (features.rows(), features.cols());
        if n == 0 || d == 0 {
            return Err(DataError::Empty);
        }
        if feature_names.len() != d {
            return Err(DataError::Shape(format!(
                "{} feature names for {d} columns",
                feature_names.len()
            )));
        }
        if targets.len() != n || row_ids.len() != n {
            return Err(DataError::Shape(format!(
                "{n} rows but {} targets and {} row ids",
                targets.len(),
                row_ids.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeature(name.clone()));
            }
        }
        for i in 0..n {
            for j in 0..d {
                if !features.get(i, j).is_finite() {
                    return Err(DataError::NonFinite { row: i, col: j });
                }
            }
            if !targets[i].is_finite() {
                return Err(DataError::NonFinite { row: i, col: d });
            }
        }
        if let Task::Classification { num_classes } = task {
            if num_classes < 2 {
                return Err(DataError::Parse(format!(
                    "classification needs at least 2 classes, got {num_classes}"
                )));
            }
            for (row, &value) in targets.iter().enumerate() {
                if value.fract() != 0.0 || value < 1.0 || value > num_classes as f64 {
                    return Err(DataError::InvalidLabel {
                        row,
                        value,
                        num_classes,
                    });
                }
            }
        }
        Ok(Self {
            features,
            feature_names,
            targets,
            task,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    /// Zero-based class index of row `i` (classification only).
    pub fn class_index(&self, i: usize) -> usize {
        self.targets[i] as usize - 1
    }

    pub fn class_indices(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.class_index(i)).collect()
    }

    pub fn select_targets(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.targets[i]).collect()
    }

    pub fn select_row_ids(&self, rows: &[usize]) -> Vec<u64> {
        rows.iter().map(|&i| self.row_ids[i]).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            feature_names: self.feature_names.clone(),
            targets: self.select_targets(rows),
            task: self.task,
            row_ids: self.select_row_ids(rows),
        }
    }

    /// Same rows and targets with a replacement feature matrix (e.g. scaled).
    pub fn with_features(&self, features: Matrix) -> Result<Dataset, DataError> {
        Dataset::with_row_ids(
            features,
            self.feature_names.clone(),
            self.targets.clone(),
            self.task,
            self.row_ids.clone(),
        )
    }

    pub fn with_feature_names(&self, names: Vec<String>) -> Result<Dataset, DataError> {
        Dataset::with_row_ids(
            self.features.clone(),
            names,
            self.targets.clone(),
            self.task,
            self.row_ids.clone(),
        )
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset, DataError> {
        Dataset::with_row_ids(
            self.features.clone(),
            self.feature_names.clone(),
            targets,
            self.task,
            self.row_ids.clone(),
        )
    }

    /// Min and max target over `rows`.
    pub fn target_range(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter()
            .map(|&i| self.targets[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
                (lo.min(y), hi.max(y))
            })
    }
}

/// Opaque aliases `feat_0 .. feat_{d-1}` for a schema.
pub fn anonymized_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("feat_{j}")).collect()
}
