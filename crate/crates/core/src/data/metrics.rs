use super::DataError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const ECE_BINS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minority_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ece: Option<f64>,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricReport, DataError> {
    check_len(y_true.len(), y_pred.len())?;
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).powi(2)).sum();
    let r2 = if ss_tot == 0.0 {
        log::debug!("R^2 undefined for constant targets (SS_tot = 0)");
        if ss_res > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    let mae = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).abs()).sum::<f64>() / n;
    Ok(MetricReport {
        r2: Some(r2),
        mae: Some(mae),
        ..Default::default()
    })
}

/// Metrics from zero-based true classes and per-row probability vectors.
pub fn classification_metrics(
    truth: &[usize],
    probs: &[Vec<f64>],
) -> Result<MetricReport, DataError> {
    check_len(truth.len(), probs.len())?;
    for (row, p) in probs.iter().enumerate() {
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(DataError::NotSimplex { row });
        }
    }
    let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let n = truth.len() as f64;
    let accuracy = truth.iter().zip(&preds).filter(|(a, b)| a == b).count() as f64 / n;
    Ok(MetricReport {
        accuracy: Some(accuracy),
        macro_f1: Some(macro_f1(truth, &preds)),
        minority_f1: Some(minority_f1(truth, &preds)),
        ece: Some(expected_calibration_error(truth, probs)),
        ..Default::default()
    })
}

/// First index of the maximum entry.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn f1_for(class: usize, truth: &[usize], preds: &[usize]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in truth.iter().zip(preds) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of per-class F1 over classes present in truth or predictions.
pub fn macro_f1(truth: &[usize], preds: &[usize]) -> f64 {
    let classes: BTreeSet<usize> = truth.iter().chain(preds).copied().collect();
    if classes.is_empty() {
        return 0.0;
    }
    classes.iter().map(|&c| f1_for(c, truth, preds)).sum::<f64>() / classes.len() as f64
}

/// F1 of the least frequent class in `truth` (lowest index on ties).
fn minority_f1(truth: &[usize], preds: &[usize]) -> f64 {
    let classes: BTreeSet<usize> = truth.iter().copied().collect();
    let minority = classes
        .iter()
        .min_by_key(|&&c| truth.iter().filter(|&&t| t == c).count())
        .copied();
    minority.map_or(0.0, |c| f1_for(c, truth, preds))
}

/// ECE over [`ECE_BINS`] equal-width bins of max-probability confidence.
pub fn expected_calibration_error(truth: &[usize], probs: &[Vec<f64>]) -> f64 {
    let mut count = [0usize; ECE_BINS];
    let mut conf = [0.0f64; ECE_BINS];
    let mut hits = [0.0f64; ECE_BINS];
    for (&t, p) in truth.iter().zip(probs) {
        let pred = argmax(p);
        let c = p[pred];
        let b = ((c * ECE_BINS as f64) as usize).min(ECE_BINS - 1);
        count[b] += 1;
        conf[b] += c;
        if pred == t {
            hits[b] += 1.0;
        }
    }
    let n = truth.len() as f64;
    (0..ECE_BINS)
        .filter(|&b| count[b] > 0)
        .map(|b| (hits[b] - conf[b]).abs() / n)
        .sum()
}

/// Mean negative log-likelihood of the true class (probabilities floored at 1e-15).
pub fn cross_entropy(truth: &[usize], probs: &[Vec<f64>]) -> f64 {
    let n = truth.len() as f64;
    truth
        .iter()
        .zip(probs)
        .map(|(&t, p)| -p[t].max(1e-15).ln())
        .sum::<f64>()
        / n
}

fn check_len(a: usize, b: usize) -> Result<(), DataError> {
    if a != b {
        return Err(DataError::Shape(format!("{a} labels vs {b} predictions")));
    }
    if a == 0 {
        return Err(DataError::Empty);
    }
    Ok(())
}
