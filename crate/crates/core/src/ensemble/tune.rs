use serde::Serialize;

use super::model::EnsembleModel;
use super::EnsembleError;
use crate::data::{cross_entropy, expected_calibration_error, Dataset};
use crate::formula::softmax;

pub const BETA_GRID: [f64; 3] = [0.3, 0.5, 0.7];
pub const TAU_GRID: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub beta: f64,
    pub beta_ce: Vec<(f64, f64)>,
    /// Per mechanism: chosen tau_k and the ECE grid.
    pub taus: Vec<(usize, f64, Vec<(f64, f64)>)>,
}

/// First grid value with the smallest objective.
fn argmin(grid: &[(f64, f64)]) -> f64 {
    let mut best = grid[0];
    for &g in &grid[1..] {
        if g.1 < best.1 {
            best = g;
        }
    }
    best.0
}

/// Picks each tau_k by validation ECE of that mechanism's own class
/// distribution, then beta by validation cross-entropy of the full
/// ensemble. Regression models are returned unchanged.
pub fn tune(
    model: &mut EnsembleModel,
    dataset: &Dataset,
    val: &[usize],
    beta_grid: &[f64],
    tau_grid: &[f64],
) -> Result<Option<TuneReport>, EnsembleError> {
    if !model.task.is_classification() || model.mechanisms.is_empty() {
        return Ok(None);
    }
    if val.is_empty() {
        return Err(EnsembleError::EmptyValidation);
    }
    let truth = dataset.class_indices(val);
    let features = dataset.features().select_rows(val);
    let single_class = truth.iter().all(|&t| t == truth[0]);
    let mut taus = Vec::new();
    for m in model.mechanisms.iter_mut() {
        if single_class {
            log::warn!("validation rows hold one class; tau_k for mechanism {} left at 1.0", m.mechanism.agent);
            m.tau_k = 1.0;
            taus.push((m.mechanism.agent, 1.0, Vec::new()));
            continue;
        }
        let bound = m.mechanism.correction.bind(dataset.feature_names())?;
        let mut keep_truth = Vec::new();
        let mut scores = Vec::new();
        for (row, &t) in features.iter_rows().zip(&truth) {
            if let Some(s) = bound.eval(row, None) {
                scores.push(s);
                keep_truth.push(t);
            }
        }
        if keep_truth.is_empty() {
            m.tau_k = 1.0;
            taus.push((m.mechanism.agent, 1.0, Vec::new()));
            continue;
        }
        let grid: Vec<(f64, f64)> = tau_grid
            .iter()
            .map(|&tau| {
                let q: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s, tau)).collect();
                (tau, expected_calibration_error(&keep_truth, &q))
            })
            .collect();
        m.tau_k = argmin(&grid);
        taus.push((m.mechanism.agent, m.tau_k, grid));
    }
    let ids = dataset.select_row_ids(val);
    let mut beta_ce = Vec::new();
    for &beta in beta_grid {
        model.hyper.beta = beta;
        let preds = model.predict(&features, dataset.feature_names(), &ids)?;
        let probs: Vec<Vec<f64>> = preds.into_iter().map(|p| p.probs.unwrap_or_default()).collect();
        beta_ce.push((beta, cross_entropy(&truth, &probs)));
    }
    model.hyper.beta = argmin(&beta_ce);
    Ok(Some(TuneReport {
        beta: model.hyper.beta,
        beta_ce,
        taus,
    }))
}
