use serde::{Deserialize, Serialize};

use super::mechanism::Mechanism;
use super::score::{attention, blend, class_probs, confidence, RegressionBounds};
use super::EnsembleError;
use crate::base::{column_indices, BaseModel};
use crate::data::{argmax, Dataset, Matrix, Task};
use crate::residual::HighResidualPool;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub beta: f64,
    pub gamma: f64,
    /// Scale of the regression global score.
    pub tau: f64,
    pub p_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetainedMechanism {
    pub mechanism: Mechanism,
    pub p: f64,
    pub tau_k: f64,
    /// Training iteration the mechanism was selected from.
    pub iteration: usize,
    pub pool: HighResidualPool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub base: BaseModel,
    pub feature_names: Vec<String>,
    pub task: Task,
    pub mechanisms: Vec<RetainedMechanism>,
    pub hyper: Hyper,
    pub bounds: Option<RegressionBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub agent: usize,
    pub p: f64,
    pub confidence: f64,
    pub alpha: f64,
    /// Clipped correction (regression).
    pub delta: Option<f64>,
    /// Class distribution (classification).
    pub q: Option<Vec<f64>>,
    /// The formula was non-finite at this query.
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// Regression estimate, or 1-based predicted label.
    pub value: f64,
    pub probs: Option<Vec<f64>>,
    pub base_value: f64,
    pub base_probs: Option<Vec<f64>>,
    pub contributions: Vec<Contribution>,
    pub fallback: bool,
}

impl EnsembleModel {
    pub fn base_only(base: BaseModel, feature_names: Vec<String>, hyper: Hyper, bounds: Option<RegressionBounds>) -> Self {
        Self {
            task: base.task(),
            base,
            feature_names,
            mechanisms: Vec::new(),
            hyper,
            bounds,
        }
    }

    pub fn predict(
        &self,
        features: &Matrix,
        names: &[String],
        row_ids: &[u64],
    ) -> Result<Vec<Prediction>, EnsembleError> {
        column_indices(&self.feature_names, names)?;
        let base = self.base.predict(features, names, row_ids)?;
        let mut bound = Vec::with_capacity(self.mechanisms.len());
        for m in &self.mechanisms {
            let pool_cols = column_indices(&m.pool.feature_names, names)?;
            bound.push((m.mechanism.correction.bind(names)?, pool_cols));
        }
        let delta_bounds = self.bounds.map(|b| b.delta);
        let p: Vec<f64> = self.mechanisms.iter().map(|m| m.p).collect();
        let mut out = Vec::with_capacity(features.rows());
        let mut xq = Vec::new();
        for (i, row) in features.iter_rows().enumerate() {
            let base_value = base.values[i];
            let base_probs = base.probs.as_ref().map(|pp| pp[i].clone());
            let mut contributions = Vec::with_capacity(self.mechanisms.len());
            let mut conf = Vec::with_capacity(self.mechanisms.len());
            for (m, (bc, cols)) in self.mechanisms.iter().zip(&bound) {
                xq.clear();
                xq.extend(cols.iter().map(|&j| row[j]));
                let c = confidence(m.pool.query_distance(&xq), self.hyper.gamma);
                let value = bc.eval(row, delta_bounds);
                if value.is_none() {
                    log::debug!("mechanism {} rejected at row {i}", m.mechanism.agent);
                }
                conf.push(if value.is_some() { c } else { 0.0 });
                let (delta, q) = match (&value, self.task) {
                    (Some(v), Task::Regression) => (Some(v[0]), None),
                    (Some(v), Task::Classification { .. }) => (None, Some(class_probs(v, m.tau_k))),
                    (None, _) => (None, None),
                };
                contributions.push(Contribution {
                    agent: m.mechanism.agent,
                    p: m.p,
                    confidence: c,
                    alpha: 0.0,
                    delta,
                    q,
                    rejected: value.is_none(),
                });
            }
            let alphas = attention(&p, &conf, self.hyper.p_min);
            let fallback = alphas.is_none();
            if let Some(a) = &alphas {
                for (c, a) in contributions.iter_mut().zip(a) {
                    c.alpha = *a;
                }
            }
            let (value, probs) = match (&alphas, &base_probs) {
                (None, _) => (base_value, base_probs.clone()),
                (Some(a), None) => {
                    let shift: f64 = contributions
                        .iter()
                        .zip(a)
                        .map(|(c, a)| c.delta.map_or(0.0, |d| a * d))
                        .sum();
                    let v = match self.bounds {
                        Some(b) => b.apply(base_value, shift),
                        None => base_value + shift,
                    };
                    (v, None)
                }
                (Some(a), Some(pml)) => {
                    let mut qs = Vec::new();
                    let mut ws = Vec::new();
                    for (c, a) in contributions.iter().zip(a) {
                        if let Some(q) = &c.q {
                            qs.push(q.clone());
                            ws.push(*a);
                        }
                    }
                    let pr = blend(pml, &qs, &ws, self.hyper.beta);
                    ((argmax(&pr) + 1) as f64, Some(pr))
                }
            };
            out.push(Prediction {
                value,
                probs,
                base_value,
                base_probs,
                contributions,
                fallback,
            });
        }
        Ok(out)
    }

    pub fn predict_rows(&self, dataset: &Dataset, rows: &[usize]) -> Result<Vec<Prediction>, EnsembleError> {
        self.predict(
            &dataset.features().select_rows(rows),
            dataset.feature_names(),
            &dataset.select_row_ids(rows),
        )
    }
}
