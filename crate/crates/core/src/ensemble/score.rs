use serde::{Deserialize, Serialize};

use crate::formula::{sigmoid, softmax, Bounds};

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_P_MIN: f64 = 0.1;
pub const DEFAULT_BETA: f64 = 0.5;
pub const TAU_RANGE_FRACTION: f64 = 0.2;

/// exp(-MAE / tau).
pub fn global_score_regression(mae: f64, tau: f64) -> f64 {
    (-mae / tau).exp()
}

/// sigmoid(gamma * (1 - d)).
pub fn confidence(d: f64, gamma: f64) -> f64 {
    sigmoid(gamma * (1.0 - d))
}

/// Normalized p_k * c_k over mechanisms with p_k > p_min; `None` when
/// nothing survives (the caller falls back to the base model).
pub fn attention(p: &[f64], c: &[f64], p_min: f64) -> Option<Vec<f64>> {
    let raw: Vec<f64> = p
        .iter()
        .zip(c)
        .map(|(&p, &c)| if p > p_min { p * c } else { 0.0 })
        .collect();
    let z: f64 = raw.iter().sum();
    if z > 0.0 && z.is_finite() {
        Some(raw.into_iter().map(|v| v / z).collect())
    } else {
        None
    }
}

/// softmax(s / tau_k).
pub fn class_probs(scores: &[f64], tau_k: f64) -> Vec<f64> {
    softmax(scores, tau_k)
}

/// beta * P_ML + (1 - beta) * sum_k alpha_k Q_k.
pub fn blend(p_ml: &[f64], qs: &[Vec<f64>], alphas: &[f64], beta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = p_ml.iter().map(|v| beta * v).collect();
    for (q, a) in qs.iter().zip(alphas) {
        for (o, v) in out.iter_mut().zip(q) {
            *o += (1.0 - beta) * a * v;
        }
    }
    out
}

/// Clipping applied to regression corrections and final predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionBounds {
    pub delta: Bounds,
    pub output: Bounds,
}

impl RegressionBounds {
    /// Outputs stay within the training target range; a single correction
    /// may move a prediction by at most that range.
    pub fn from_targets(lo: f64, hi: f64) -> Self {
        let width = (hi - lo).max(f64::MIN_POSITIVE);
        Self {
            delta: Bounds::symmetric(width),
            output: Bounds::new(lo, hi),
        }
    }

    pub fn unit() -> Self {
        Self::from_targets(0.0, 1.0)
    }

    /// Clips `base + delta` to the output range widened to contain `base`,
    /// so a correction never drags a prediction further out than the base
    /// model put it and a zero correction is an exact identity.
    pub fn apply(&self, base: f64, delta: f64) -> f64 {
        let lo = self.output.lo.min(base);
        let hi = self.output.hi.max(base);
        (base + delta).clamp(lo, hi)
    }
}

/// tau for regression global scores: 0.2 x target range.
pub fn regression_tau(lo: f64, hi: f64) -> f64 {
    let t = TAU_RANGE_FRACTION * (hi - lo);
    if t > 0.0 {
        t
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores() {
        assert_eq!(global_score_regression(0.0, 0.3), 1.0);
        assert!((global_score_regression(0.3, 0.3) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn confidences() {
        assert_eq!(confidence(1.0, 2.0), 0.5);
        assert!((confidence(0.0, 2.0) - 0.8807970779778823).abs() < 1e-12);
        assert!(confidence(0.2, 2.0) > confidence(0.3, 2.0));
    }

    #[test]
    fn attention_cases() {
        assert_eq!(attention(&[0.9], &[0.6], 0.1), Some(vec![1.0]));
        assert_eq!(attention(&[0.1, 0.05], &[1.0, 1.0], 0.1), None);
        let a = attention(&[0.6, 0.3], &[0.5, 1.0], 0.1).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-15 && (a[1] - 0.5).abs() < 1e-15);
        assert_eq!(attention(&[0.6, 0.05], &[0.5, 1.0], 0.1), Some(vec![1.0, 0.0]));
    }

    #[test]
    fn blends() {
        let p = blend(&[0.8, 0.2], &[vec![0.2, 0.8]], &[1.0], 0.5);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert_eq!(blend(&[0.8, 0.2], &[vec![0.2, 0.8]], &[1.0], 1.0), vec![0.8, 0.2]);
        assert_eq!(blend(&[0.8, 0.2], &[vec![0.2, 0.8]], &[1.0], 0.0), vec![0.2, 0.8]);
    }

    #[test]
    fn bounds() {
        let b = RegressionBounds::from_targets(1.0, 3.0);
        assert_eq!(b.apply(2.5, 1.0), 3.0);
        assert_eq!(b.apply(3.5, 0.0), 3.5);
        assert_eq!(b.apply(3.5, 1.0), 3.5);
        assert_eq!(b.apply(3.5, -1.0), 2.5);
        assert_eq!(b.delta.clip(-5.0).0, -2.0);
        assert_eq!(regression_tau(0.0, 1.0), 0.2);
    }
}
