//! Base predictors the corrections are layered on.

mod frozen;
mod linear;
mod logistic;

pub use frozen::FrozenPredictions;
pub use linear::LinearModel;
pub use logistic::LogisticModel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, Matrix, Task};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-3;
pub const DEFAULT_LOGISTIC_LAMBDA: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum BaseError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no training rows")]
    NoTrainRows,
    #[error("logistic regression needs at least two classes in the training rows")]
    SingleClass,
    #[error("task mismatch: model is {model}, data is {data}")]
    TaskMismatch { model: String, data: String },
    #[error("input is missing model columns: {0:?}")]
    SchemaMismatch(Vec<String>),
    #[error("frozen predictions have no row {0}")]
    MissingRow(u64),
    #[error("frozen predictions: {0}")]
    Frozen(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKind {
    Linear,
    Ridge { lambda: Option<f64> },
    Logistic { lambda: Option<f64> },
    Frozen(FrozenPredictions),
}

impl BaseKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaseKind::Linear => "linear",
            BaseKind::Ridge { .. } => "ridge",
            BaseKind::Logistic { .. } => "logistic",
            BaseKind::Frozen(_) => "frozen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    Linear(LinearModel),
    Logistic(LogisticModel),
    Frozen(FrozenPredictions),
}

/// Regression: `values` only. Classification: `values` holds the 1-based
/// predicted label and `probs` the class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePrediction {
    pub values: Vec<f64>,
    pub probs: Option<Vec<Vec<f64>>>,
}

pub fn fit(kind: &BaseKind, dataset: &Dataset, train: &[usize]) -> Result<BaseModel, BaseError> {
    if train.is_empty() {
        return Err(BaseError::NoTrainRows);
    }
    match kind {
        BaseKind::Linear | BaseKind::Ridge { .. } => {
            if dataset.task().is_classification() {
                return Err(BaseError::TaskMismatch {
                    model: kind.name().into(),
                    data: "classification".into(),
                });
            }
            let lambda = match kind {
                BaseKind::Ridge { lambda } => lambda.unwrap_or(DEFAULT_RIDGE_LAMBDA),
                _ => 0.0,
            };
            Ok(BaseModel::Linear(LinearModel::fit(dataset, train, lambda)?))
        }
        BaseKind::Logistic { lambda } => {
            let Task::Classification { .. } = dataset.task() else {
                return Err(BaseError::TaskMismatch {
                    model: "logistic".into(),
                    data: "regression".into(),
                });
            };
            Ok(BaseModel::Logistic(LogisticModel::fit(
                dataset,
                train,
                lambda.unwrap_or(DEFAULT_LOGISTIC_LAMBDA),
            )?))
        }
        BaseKind::Frozen(f) => {
            if f.task() != dataset.task() {
                return Err(BaseError::TaskMismatch {
                    model: format!("{:?}", f.task()),
                    data: format!("{:?}", dataset.task()),
                });
            }
            for &i in train {
                f.lookup(dataset.row_ids()[i])?;
            }
            Ok(BaseModel::Frozen(f.clone()))
        }
    }
}

/// Column indices of `wanted` inside `have`, or every missing name.
pub fn column_indices(wanted: &[String], have: &[String]) -> Result<Vec<usize>, BaseError> {
    let mut missing = Vec::new();
    let idx: Vec<usize> = wanted
        .iter()
        .filter_map(|w| {
            let p = have.iter().position(|h| h == w);
            if p.is_none() {
                missing.push(w.clone());
            }
            p
        })
        .collect();
    if missing.is_empty() {
        Ok(idx)
    } else {
        Err(BaseError::SchemaMismatch(missing))
    }
}

impl BaseModel {
    pub fn task(&self) -> Task {
        match self {
            BaseModel::Linear(_) => Task::Regression,
            BaseModel::Logistic(m) => Task::Classification {
                num_classes: m.num_classes(),
            },
            BaseModel::Frozen(f) => f.task(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BaseModel::Linear(m) if m.lambda() > 0.0 => "ridge",
            BaseModel::Linear(_) => "linear",
            BaseModel::Logistic(_) => "logistic",
            BaseModel::Frozen(_) => "frozen",
        }
    }

    /// Predicts rows of `features` (columns named `names`). Frozen models
    /// look rows up by `row_ids` and ignore the features.
    pub fn predict(
        &self,
        features: &Matrix,
        names: &[String],
        row_ids: &[u64],
    ) -> Result<BasePrediction, BaseError> {
        match self {
            BaseModel::Linear(m) => Ok(BasePrediction {
                values: m.predict(features, names)?,
                probs: None,
            }),
            BaseModel::Logistic(m) => {
                let probs = m.predict_proba(features, names)?;
                let values = probs
                    .iter()
                    .map(|p| (crate::data::argmax(p) + 1) as f64)
                    .collect();
                Ok(BasePrediction {
                    values,
                    probs: Some(probs),
                })
            }
            BaseModel::Frozen(f) => f.predict(row_ids),
        }
    }

    pub fn predict_rows(&self, dataset: &Dataset, rows: &[usize]) -> Result<BasePrediction, BaseError> {
        self.predict(
            &dataset.features().select_rows(rows),
            dataset.feature_names(),
            &dataset.select_row_ids(rows),
        )
    }

    /// Per-feature importance; absolute coefficients for linear kinds.
    pub fn importances(&self) -> Option<Vec<(String, f64)>> {
        match self {
            BaseModel::Linear(m) => Some(
                m.feature_names()
                    .iter()
                    .cloned()
                    .zip(m.weights().iter().map(|w| w.abs()))
                    .collect(),
            ),
            BaseModel::Logistic(m) => Some(m.importances()),
            BaseModel::Frozen(_) => None,
        }
    }

    /// Short text summary of what the base model learned, for prompts.
    pub fn digest(&self) -> String {
        match self {
            BaseModel::Linear(m) => {
                let mut s = format!("{} model, intercept {:.4}\n", self.kind_name(), m.intercept());
                for (n, w) in m.feature_names().iter().zip(m.weights()) {
                    s.push_str(&format!("  {n}: {w:+.4}\n"));
                }
                s
            }
            BaseModel::Logistic(m) => {
                let mut s = format!(
                    "multinomial logistic model, {} classes; importance = mean |weight| on standardized features\n",
                    m.num_classes()
                );
                for (n, w) in m.importances() {
                    s.push_str(&format!("  {n}: {w:.4}\n"));
                }
                s
            }
            BaseModel::Frozen(f) => format!("externally trained model ({})\n", f.provenance()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            vec!["x".into()],
            (0..6).map(|i| 2.0 * i as f64).collect(),
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn task_checks() {
        let d = reg();
        let rows: Vec<usize> = (0..6).collect();
        assert!(matches!(fit(&BaseKind::Logistic { lambda: None }, &d, &rows), Err(BaseError::TaskMismatch { .. })));
        assert!(matches!(fit(&BaseKind::Linear, &d, &[]), Err(BaseError::NoTrainRows)));
        let m = fit(&BaseKind::Ridge { lambda: None }, &d, &rows).unwrap();
        assert_eq!(m.kind_name(), "ridge");
        assert!(m.digest().contains("x:"));
    }

    #[test]
    fn schema_mismatch_names_columns() {
        let d = reg();
        let m = fit(&BaseKind::Linear, &d, &[0, 1, 2]).unwrap();
        let err = m
            .predict(&Matrix::from_rows(&[[1.0]]).unwrap(), &["y".to_string()], &[0])
            .unwrap_err();
        assert!(matches!(err, BaseError::SchemaMismatch(v) if v == vec!["x".to_string()]));
    }
}
