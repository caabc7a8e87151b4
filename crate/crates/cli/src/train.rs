use std::collections::BTreeMap;
use std::path::Path;

use anyhow::anyhow;
use serde::Serialize;

use rescor_core::agent::{
    anonymize, summarize, train, AgentReport, CallLedger, HttpProvider, LedgerEntry, LedgerSummary, LlmProvider,
    RecordingProvider, Regeneration, ScriptedProvider, Templates, TrainInput,
};
use rescor_core::base::fit;
use rescor_core::data::{
    classification_metrics, load_csv, load_csv_with_task, make_split, regression_metrics, MetricReport, Split,
};
use rescor_core::ensemble::{save_bundle, tune, EnsembleModel, Mechanism, TuneReport};
use rescor_core::formula::render_mechanism_file;
use rescor_core::{Dataset, Task};

use crate::config::{ProviderSpec, RunConfig};
use crate::error::{CliResult, Failure};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const FEATURE_MAP_FILE: &str = "feature_map.json";

#[derive(Serialize)]
struct ConfigSnapshot<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    template_hashes: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct SplitMetrics {
    rows: usize,
    base: MetricReport,
    ensemble: MetricReport,
}

#[derive(Serialize)]
struct MechanismSummary {
    agent: usize,
    iteration: usize,
    p: f64,
    tau_k: f64,
    formulas: Vec<String>,
}

#[derive(Serialize)]
struct CallsReport {
    expected: Option<usize>,
    summary: LedgerSummary,
    entries: Vec<LedgerEntry>,
}

#[derive(Serialize)]
struct FinalResults {
    schema_version: u32,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    task: Task,
    seeds: BTreeMap<&'static str, u64>,
    split_sizes: BTreeMap<&'static str, usize>,
    provider: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<&'static str, SplitMetrics>,
    mechanisms: Vec<MechanismSummary>,
    agents: Vec<AgentReport>,
    regenerations: Vec<Regeneration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tune: Option<TuneReport>,
    calls: CallsReport,
}

pub fn load_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("no dataset given (`data` key or --data)")))?;
    let task = cfg.task().map_err(Failure::config)?;
    let ds = match task {
        Some(t) => load_csv_with_task(path, t),
        None => load_csv(path),
    };
    ds.map_err(|e| Failure::data(e).context(format!("loading {}", path.display())))
}

fn build_provider(cfg: &RunConfig) -> CliResult<Box<dyn LlmProvider>> {
    match cfg.provider_spec().map_err(Failure::config)? {
        ProviderSpec::Scripted(path) => Ok(Box::new(ScriptedProvider::load(&path)?)),
        ProviderSpec::Http(settings) => Ok(Box::new(HttpProvider::new(settings)?)),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::data(e).context(format!("writing {}", path.display())))
}

fn write_iteration(dir: &Path, t: usize, mechanisms: &[Mechanism]) -> std::io::Result<()> {
    let blocks: Vec<_> = mechanisms.iter().map(|m| m.to_block()).collect();
    std::fs::write(dir.join(format!("mechanisms_iter_{t}.txt")), render_mechanism_file(&blocks))
}

fn split_metrics(model: &EnsembleModel, ds: &Dataset, rows: &[usize]) -> CliResult<SplitMetrics> {
    let preds = model.predict_rows(ds, rows)?;
    let (base, ensemble) = if ds.task().is_classification() {
        let truth = ds.class_indices(rows);
        let base: Vec<Vec<f64>> = preds.iter().map(|p| p.base_probs.clone().unwrap_or_default()).collect();
        let ens: Vec<Vec<f64>> = preds.iter().map(|p| p.probs.clone().unwrap_or_default()).collect();
        (classification_metrics(&truth, &base)?, classification_metrics(&truth, &ens)?)
    } else {
        let y = ds.select_targets(rows);
        let base: Vec<f64> = preds.iter().map(|p| p.base_value).collect();
        let ens: Vec<f64> = preds.iter().map(|p| p.value).collect();
        (regression_metrics(&y, &base)?, regression_metrics(&y, &ens)?)
    };
    Ok(SplitMetrics {
        rows: rows.len(),
        base,
        ensemble,
    })
}

fn split_sizes(split: &Split) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([("train", split.train.len()), ("val", split.val.len()), ("test", split.test.len())])
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    let mut ds = load_dataset(cfg)?;
    let mut agent_cfg = cfg.agent_config();
    let out = &cfg.output;
    std::fs::create_dir_all(out)?;
    if cfg.anonymize_features {
        agent_cfg.anonymize_features = false;
        let (anon, anon_cfg, aliases) = anonymize(&ds, &agent_cfg)?;
        ds = anon;
        agent_cfg = anon_cfg;
        let map: BTreeMap<&str, &str> = aliases.iter().map(|(o, a)| (o.as_str(), a.as_str())).collect();
        write_json(&out.join(FEATURE_MAP_FILE), &map)?;
    }
    let split = make_split(&ds, &cfg.split_spec(ds.task()))?;
    let base = fit(&cfg.base_kind()?, &ds, &split.train)?;
    let templates = match &cfg.templates_dir {
        Some(dir) => Templates::load_dir(dir)?,
        None => Templates::default(),
    };
    write_json(
        &out.join("config.json"),
        &ConfigSnapshot {
            schema_version: RESULTS_SCHEMA_VERSION,
            config: cfg,
            template_hashes: templates.hashes(),
        },
    )?;

    let provider = RecordingProvider::new(build_provider(cfg)?);
    let ledger = CallLedger::new(&provider, agent_cfg.params.clone());
    let mut hook_error = None;
    let result = train(
        TrainInput {
            dataset: &ds,
            train_rows: &split.train,
            base: &base,
            config: &agent_cfg,
            templates: &templates,
        },
        &ledger,
        &mut |t, mechanisms| {
            if let Err(e) = write_iteration(out, t, mechanisms) {
                hook_error.get_or_insert(e);
            }
        },
    );
    std::fs::write(out.join("transcript.txt"), provider.transcript())?;
    if let Some(e) = hook_error {
        return Err(Failure::data(e).context("writing mechanism files"));
    }
    let seeds = BTreeMap::from([("split", cfg.seed)]);
    let trained = match result {
        Ok(t) => t,
        Err(e) => {
            let failure = Failure::from(e);
            let entries = ledger.entries();
            let partial = FinalResults {
                schema_version: RESULTS_SCHEMA_VERSION,
                status: "failed",
                error: Some(failure.to_string()),
                task: ds.task(),
                seeds,
                split_sizes: split_sizes(&split),
                provider: ledger.provider_name(),
                metrics: BTreeMap::new(),
                mechanisms: Vec::new(),
                agents: Vec::new(),
                regenerations: Vec::new(),
                tune: None,
                calls: CallsReport {
                    expected: None,
                    summary: summarize(&entries),
                    entries,
                },
            };
            write_json(&out.join("final_results.json"), &partial)?;
            return Err(failure);
        }
    };

    let mut model = trained.model;
    let tune_report = if split.val.is_empty() {
        None
    } else {
        tune(&mut model, &ds, &split.val, &cfg.beta_grid, &cfg.tau_grid)?
    };
    let mut metrics = BTreeMap::new();
    for (name, rows) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if !rows.is_empty() {
            metrics.insert(name, split_metrics(&model, &ds, rows)?);
        }
    }
    save_bundle(&model, &out.join("bundle"))?;
    let mechanisms = model
        .mechanisms
        .iter()
        .map(|m| MechanismSummary {
            agent: m.mechanism.agent,
            iteration: m.iteration,
            p: m.p,
            tau_k: m.tau_k,
            formulas: m.mechanism.correction.formulas().iter().map(|f| f.to_string()).collect(),
        })
        .collect();
    let results = FinalResults {
        schema_version: RESULTS_SCHEMA_VERSION,
        status: "ok",
        error: None,
        task: ds.task(),
        seeds,
        split_sizes: split_sizes(&split),
        provider: ledger.provider_name(),
        metrics,
        mechanisms,
        agents: trained.reports,
        regenerations: trained.regenerations,
        tune: tune_report,
        calls: CallsReport {
            expected: Some(trained.expected_calls),
            summary: summarize(&trained.ledger),
            entries: trained.ledger,
        },
    };
    write_json(&out.join("final_results.json"), &results)?;
    if let Some(test) = results.metrics.get("test") {
        println!("test base: {}", serde_json::to_string(&test.base)?);
        println!("test ensemble: {}", serde_json::to_string(&test.ensemble)?);
    }
    println!(
        "{} retained mechanisms, {} provider calls; artifact in {}",
        results.mechanisms.len(),
        results.calls.summary.total,
        out.display()
    );
    Ok(())
}
