//! Per-mechanism training-time evaluation: loss and global score.

use super::mechanism::Correction;
use super::score::{blend, class_probs, global_score_regression, RegressionBounds};
use crate::base::BasePrediction;
use crate::data::{argmax, cross_entropy, macro_f1, Dataset, Matrix};
use crate::formula::FormulaError;

#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Regression(Vec<f64>),
    /// 0-based class indices.
    Classification(Vec<usize>),
}

impl Truth {
    pub fn from_rows(dataset: &Dataset, rows: &[usize]) -> Self {
        if dataset.task().is_classification() {
            Truth::Classification(dataset.class_indices(rows))
        } else {
            Truth::Regression(dataset.select_targets(rows))
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Truth::Regression(v) => v.len(),
            Truth::Classification(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Full-weight corrected predictions of one mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum Corrected {
    Regression(Vec<f64>),
    Classification(Vec<Vec<f64>>),
}

/// Settings shared by training-time evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub bounds: Option<RegressionBounds>,
    pub beta: f64,
    pub tau_k: f64,
}

/// `None` when the formula produces a non-finite value on any row.
pub fn corrected_predictions(
    correction: &Correction,
    features: &Matrix,
    names: &[String],
    base: &BasePrediction,
    settings: &EvalSettings,
) -> Result<Option<Corrected>, FormulaError> {
    let delta_bounds = settings.bounds.map(|b| b.delta);
    let Some(raw) = correction.evaluate_rows(features, names, delta_bounds)? else {
        return Ok(None);
    };
    Ok(Some(match correction {
        Correction::Regression(_) => Corrected::Regression(
            base.values
                .iter()
                .zip(&raw)
                .map(|(b, d)| match settings.bounds {
                    Some(bd) => bd.apply(*b, d[0]),
                    None => b + d[0],
                })
                .collect(),
        ),
        Correction::Classification(_) => {
            let probs = base.probs.as_ref().ok_or_else(|| FormulaError::ClassCount {
                expected: raw.first().map_or(0, Vec::len),
                got: 0,
            })?;
            Corrected::Classification(
                probs
                    .iter()
                    .zip(&raw)
                    .map(|(p, s)| blend(p, &[class_probs(s, settings.tau_k)], &[1.0], settings.beta))
                    .collect(),
            )
        }
    }))
}

/// Mean squared error or cross-entropy; +inf for a rejected mechanism.
pub fn loss(corrected: Option<&Corrected>, truth: &Truth) -> f64 {
    match (corrected, truth) {
        (Some(Corrected::Regression(p)), Truth::Regression(y)) => {
            p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
        }
        (Some(Corrected::Classification(p)), Truth::Classification(y)) => cross_entropy(y, p),
        _ => f64::INFINITY,
    }
}

pub fn base_loss(base: &BasePrediction, truth: &Truth) -> f64 {
    match (&base.probs, truth) {
        (Some(p), Truth::Classification(y)) => cross_entropy(y, p),
        (None, Truth::Regression(y)) => {
            base.values.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
        }
        _ => f64::INFINITY,
    }
}

/// exp(-MAE/tau) or macro-F1; 0 for a rejected mechanism.
pub fn global_score(corrected: Option<&Corrected>, truth: &Truth, tau: f64) -> f64 {
    match (corrected, truth) {
        (Some(Corrected::Regression(p)), Truth::Regression(y)) => {
            let mae = p.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64;
            global_score_regression(mae, tau)
        }
        (Some(Corrected::Classification(p)), Truth::Classification(y)) => {
            let pred: Vec<usize> = p.iter().map(|r| argmax(r)).collect();
            macro_f1(y, &pred)
        }
        _ => 0.0,
    }
}
