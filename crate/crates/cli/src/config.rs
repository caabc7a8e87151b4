//! Flat JSON run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file,
//! `--set key=value` pairs, then dedicated flags such as `--seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use rescor_core::agent::{
    AgentConfig, CompletionParams, HttpSettings, WireFormat, DEFAULT_FAILURE_ROWS, DEFAULT_RETRY_BUDGET,
};
use rescor_core::base::{BaseKind, FrozenPredictions};
use rescor_core::data::SplitSpec;
use rescor_core::ensemble::{BETA_GRID, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_P_MIN, TAU_GRID};
use rescor_core::residual::DEFAULT_GAMMA_S;
use rescor_core::Task;

use crate::error::{CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// `regression` or `classification`; when unset the CSV sidecar decides.
    pub task: Option<String>,
    pub num_classes: Option<usize>,

    /// `linear`, `ridge`, `logistic` or `frozen`.
    pub base: String,
    pub lambda: Option<f64>,
    pub frozen_predictions: Option<PathBuf>,

    pub k: usize,
    pub t: usize,
    pub b: usize,
    pub kappa: f64,
    pub tau_fail: f64,
    pub p_min: f64,
    pub gamma: f64,
    pub gamma_s: f64,
    pub beta: f64,
    pub beta_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub retry_budget: usize,
    pub failure_rows: usize,

    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Quantile bins for stratified regression splits; 0 means a random split.
    pub q_bins: usize,

    /// `scripted:<transcript path>` or `http`.
    pub provider: String,
    pub endpoint: Option<String>,
    pub wire_format: WireFormat,
    pub response_pointer: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,

    pub include_domain_context: bool,
    pub domain_context: Option<String>,
    pub feature_descriptions: BTreeMap<String, String>,
    pub anonymize_features: bool,
    pub templates_dir: Option<PathBuf>,

    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = CompletionParams::default();
        Self {
            data: None,
            task: None,
            num_classes: None,
            base: "linear".into(),
            lambda: None,
            frozen_predictions: None,
            k: 2,
            t: 10,
            b: 10,
            kappa: 0.3,
            tau_fail: 0.5,
            p_min: DEFAULT_P_MIN,
            gamma: DEFAULT_GAMMA,
            gamma_s: DEFAULT_GAMMA_S,
            beta: DEFAULT_BETA,
            beta_grid: BETA_GRID.to_vec(),
            tau_grid: TAU_GRID.to_vec(),
            retry_budget: DEFAULT_RETRY_BUDGET,
            failure_rows: DEFAULT_FAILURE_ROWS,
            seed: 0,
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
            q_bins: 5,
            provider: "http".into(),
            endpoint: None,
            wire_format: WireFormat::OpenaiChat,
            response_pointer: None,
            api_key_env: None,
            timeout_secs: 120,
            model: params.model,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            include_domain_context: true,
            domain_context: None,
            feature_descriptions: BTreeMap::new(),
            anonymize_features: false,
            templates_dir: None,
            output: PathBuf::from("run"),
        }
    }
}

pub enum ProviderSpec {
    Scripted(PathBuf),
    Http(HttpSettings),
}

/// Parses the right-hand side of `--set key=value`: JSON when it parses,
/// a plain string otherwise.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    /// Builds the config from an optional file plus overrides, in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> CliResult<Self> {
        let mut map = match serde_json::to_value(Self::default()).map_err(Failure::config)? {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(anyhow!("reading {}: {e}", path.display())))?;
            let parsed: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::config(anyhow!("{}: {e}", path.display())))?;
            let Value::Object(entries) = parsed else {
                return Err(Failure::config(anyhow!("{}: expected a JSON object", path.display())));
            };
            merge(&mut map, entries)?;
        }
        merge(&mut map, overrides.iter().cloned().collect())?;
        let cfg: Self = serde_json::from_value(Value::Object(map)).map_err(Failure::config)?;
        cfg.validate().map_err(Failure::config)?;
        Ok(cfg)
    }

    pub fn parse_set(pairs: &[String]) -> CliResult<Vec<(String, Value)>> {
        pairs
            .iter()
            .map(|p| {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| Failure::config(anyhow!("--set expects key=value, got `{p}`")))?;
                Ok((k.trim().to_string(), parse_value(v.trim())))
            })
            .collect()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let fr = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!("split fractions must lie in [0, 1] and sum to 1, got {fr:?}");
        }
        if self.beta_grid.is_empty() || self.tau_grid.is_empty() {
            bail!("beta_grid and tau_grid must be non-empty");
        }
        if self.beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
            bail!("beta_grid values must lie in [0, 1]");
        }
        if self.tau_grid.iter().any(|t| !(*t > 0.0)) {
            bail!("tau_grid values must be positive");
        }
        self.task()?;
        self.base_kind_name()?;
        self.provider_spec()?;
        self.agent_config().validate().map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }

    /// Explicit task, when the config names one.
    pub fn task(&self) -> anyhow::Result<Option<Task>> {
        match self.task.as_deref() {
            None => Ok(None),
            Some("regression") => Ok(Some(Task::Regression)),
            Some("classification") => {
                let num_classes = self
                    .num_classes
                    .ok_or_else(|| anyhow!("task = classification needs num_classes"))?;
                Ok(Some(Task::Classification { num_classes }))
            }
            Some(other) => bail!("unknown task `{other}`"),
        }
    }

    fn base_kind_name(&self) -> anyhow::Result<&str> {
        match self.base.as_str() {
            b @ ("linear" | "ridge" | "logistic") => Ok(b),
            "frozen" => {
                if self.frozen_predictions.is_none() {
                    bail!("base = frozen needs frozen_predictions");
                }
                Ok("frozen")
            }
            other => bail!("unknown base model `{other}`"),
        }
    }

    pub fn base_kind(&self) -> CliResult<BaseKind> {
        Ok(match self.base_kind_name().map_err(Failure::config)? {
            "linear" => BaseKind::Linear,
            "ridge" => BaseKind::Ridge { lambda: self.lambda },
            "logistic" => BaseKind::Logistic { lambda: self.lambda },
            _ => {
                let path = self.frozen_predictions.as_ref().expect("validated");
                BaseKind::Frozen(FrozenPredictions::load(path)?)
            }
        })
    }

    pub fn provider_spec(&self) -> anyhow::Result<ProviderSpec> {
        if let Some(path) = self.provider.strip_prefix("scripted:") {
            if path.is_empty() {
                bail!("scripted provider needs a transcript path");
            }
            return Ok(ProviderSpec::Scripted(PathBuf::from(path)));
        }
        if self.provider != "http" {
            bail!("provider must be `http` or `scripted:<path>`, got `{}`", self.provider);
        }
        let endpoint = self
            .endpoint
            .clone()
            .ok_or_else(|| anyhow!("provider = http needs endpoint"))?;
        Ok(ProviderSpec::Http(HttpSettings {
            endpoint,
            format: self.wire_format,
            response_pointer: self.response_pointer.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
        }))
    }

    pub fn split_spec(&self, task: Task) -> SplitSpec {
        let spec = SplitSpec::new(self.train_fraction, self.val_fraction, self.test_fraction, self.seed);
        if self.q_bins > 0 && !task.is_classification() {
            spec.stratified(self.q_bins)
        } else {
            spec
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            k: self.k,
            t: self.t,
            b: self.b,
            kappa: self.kappa,
            tau_fail: self.tau_fail,
            p_min: self.p_min,
            gamma: self.gamma,
            gamma_s: self.gamma_s,
            beta: self.beta,
            retry_budget: self.retry_budget,
            failure_rows: self.failure_rows,
            include_domain_context: self.include_domain_context,
            anonymize_features: self.anonymize_features,
            domain_context: self.domain_context.clone(),
            feature_descriptions: self.feature_descriptions.clone(),
            params: CompletionParams {
                model: self.model.clone(),
                temperature: self.temperature,
                max_tokens: self.max_tokens,
            },
        }
    }
}

fn merge(map: &mut Map<String, Value>, entries: Map<String, Value>) -> CliResult<()> {
    for (k, v) in entries {
        if !map.contains_key(&k) {
            return Err(Failure::config(anyhow!("unknown config key `{k}`")));
        }
        map.insert(k, v);
    }
    Ok(())
}
