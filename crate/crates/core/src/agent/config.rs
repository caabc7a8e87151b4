use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::provider::CompletionParams;
use super::AgentError;
use crate::ensemble::{DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_P_MIN};
use crate::residual::DEFAULT_GAMMA_S;

pub const DEFAULT_RETRY_BUDGET: usize = 3;
pub const DEFAULT_FAILURE_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub k: usize,
    pub t: usize,
    pub b: usize,
    pub kappa: f64,
    pub tau_fail: f64,
    pub p_min: f64,
    pub gamma: f64,
    pub gamma_s: f64,
    /// Blend weight used for classification losses during training.
    pub beta: f64,
    pub retry_budget: usize,
    pub failure_rows: usize,
    pub include_domain_context: bool,
    pub anonymize_features: bool,
    pub domain_context: Option<String>,
    pub feature_descriptions: BTreeMap<String, String>,
    pub params: CompletionParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            k: 2,
            t: 10,
            b: 10,
            kappa: 0.3,
            tau_fail: 0.5,
            p_min: DEFAULT_P_MIN,
            gamma: DEFAULT_GAMMA,
            gamma_s: DEFAULT_GAMMA_S,
            beta: DEFAULT_BETA,
            retry_budget: DEFAULT_RETRY_BUDGET,
            failure_rows: DEFAULT_FAILURE_ROWS,
            include_domain_context: true,
            anonymize_features: false,
            domain_context: None,
            feature_descriptions: BTreeMap::new(),
            params: CompletionParams::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if self.k < 1 {
            return bad("K must be at least 1");
        }
        if self.b < 1 {
            return bad("B must be at least 1");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0, 1]");
        }
        if !(self.tau_fail > 0.0 && self.tau_fail < 1.0) {
            return bad("tau_fail must lie in (0, 1)");
        }
        if !(self.p_min >= 0.0) {
            return bad("p_min must be non-negative");
        }
        if !(self.gamma > 0.0) || !(self.gamma_s > 0.0) {
            return bad("gamma and gamma_s must be positive");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        if self.failure_rows < 1 {
            return bad("failure_rows must be at least 1");
        }
        Ok(())
    }
}

/// K * ceil(pool / B) encoder calls plus K * (1 + 2T) decoder, critique and
/// refinement calls.
pub fn count_calls(k: usize, t: usize, pool_size: usize, b: usize) -> usize {
    k * pool_size.div_ceil(b) + k * (1 + 2 * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_counts() {
        assert_eq!(count_calls(1, 5, 30, 10), 14);
        assert_eq!(count_calls(2, 5, 50, 10), 32);
        assert_eq!(count_calls(2, 10, 100, 10), 62);
        assert_eq!(count_calls(2, 10, 200, 10), 82);
        assert_eq!(count_calls(1, 0, 10, 10), 2);
        assert_eq!(count_calls(1, 0, 25, 10), 4);
    }

    #[test]
    fn validation() {
        assert!(AgentConfig::default().validate().is_ok());
        for c in [
            AgentConfig { k: 0, ..Default::default() },
            AgentConfig { tau_fail: 1.0, ..Default::default() },
            AgentConfig { kappa: 0.0, ..Default::default() },
            AgentConfig { p_min: -0.1, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
