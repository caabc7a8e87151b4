//! `rescor`: train residual-correction ensembles, predict with saved
//! bundles, and run the synthetic, transfer and statistics benches.
//!
//! Exit codes: 0 success, 1 a requested check failed, 2 configuration
//! error, 3 provider error, 4 data error.

mod commands;
mod config;
mod error;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::{PlateSource, PredictArgs, StatsArgs, SynthArgs, TransferArgs};
use config::RunConfig;
use error::CliResult;
use rescor_core::harness::{MlSource, SourceFilter, TransferConfig, TransferMode};

#[derive(Parser)]
#[command(name = "rescor", version, about = "Residual-correction ensembles with symbolic formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the base model, run the agents and write a run artifact.
    Train(TrainArgs),
    /// Score a CSV with a saved bundle (no provider calls).
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Add per-mechanism confidence, attention weight and correction columns.
        #[arg(long)]
        explain: bool,
        /// feature_map.json from an anonymized training run.
        #[arg(long)]
        feature_map: Option<PathBuf>,
    },
    /// Evaluate frozen formulas across plates.
    Transfer(TransferCli),
    /// Generate the planted-law benchmark and its oracle reference.
    Synth {
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_std: f64,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Estimate per-term variances and compare them with the reference budget.
        #[arg(long)]
        check_budget: bool,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
    },
    /// Benjamini-Hochberg correction and paired Wilcoxon tests.
    Stats {
        /// Comma-separated p-values.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Number of hypotheses; defaults to the number of p-values.
        #[arg(long)]
        m: Option<usize>,
        /// Two-column CSV of paired scores.
        #[arg(long)]
        paired: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        decimals: i32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rename features to feat_0.. and write the mapping.
    Anonymize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Flat JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set kappa=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// `http` or `scripted:<transcript>`.
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    anonymize: bool,
}

impl TrainArgs {
    fn overrides(&self) -> CliResult<Vec<(String, Value)>> {
        let mut o = RunConfig::parse_set(&self.set)?;
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("data", self.data.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        put("output", self.output.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        put("provider", self.provider.clone().map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("k", self.k.map(Value::from));
        put("t", self.t.map(Value::from));
        put("base", self.base.clone().map(Value::from));
        put("anonymize_features", self.anonymize.then_some(Value::Bool(true)));
        Ok(o)
    }
}

#[derive(Args)]
struct TransferCli {
    /// Use the built-in two-cohort synthetic plates and source runs.
    #[arg(long, conflicts_with_all = ["plates", "runs"])]
    synthetic: bool,
    /// CSV with plate, cohort, feature and target columns.
    #[arg(long, requires = "runs")]
    plates: Option<PathBuf>,
    /// JSON list of source runs.
    #[arg(long)]
    runs: Option<PathBuf>,
    #[arg(long, default_value = "plate")]
    plate_column: String,
    #[arg(long, default_value = "cohort")]
    cohort_column: String,
    #[arg(long, default_value = "target")]
    target_column: String,
    /// headline, per-formula, formula-only or joint.
    #[arg(long, default_value = "headline", value_parser = commands::parse_mode)]
    ablation: TransferMode,
    /// filtered, unfiltered or below-filter.
    #[arg(long, default_value = "filtered", value_parser = commands::parse_filter)]
    filter: SourceFilter,
    /// auto, transfer or retrain.
    #[arg(long, default_value = "auto", value_parser = commands::parse_ml_source)]
    ml_source: MlSource,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long)]
    residual_pilot: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "transfer")]
    out: PathBuf,
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Train(args) => {
            let cfg = RunConfig::resolve(args.config.as_deref(), &args.overrides()?)?;
            train::cmd_train(&cfg)?;
        }
        Command::Predict {
            bundle,
            input,
            output,
            explain,
            feature_map,
        } => commands::cmd_predict(&PredictArgs {
            bundle,
            input,
            output,
            explain,
            feature_map,
        })?,
        Command::Transfer(t) => {
            let plates = match (t.synthetic, t.plates, t.runs) {
                (true, _, _) => PlateSource::Synthetic,
                (false, Some(path), Some(runs)) => PlateSource::Table {
                    path,
                    plate_column: t.plate_column,
                    cohort_column: t.cohort_column,
                    target_column: t.target_column,
                    runs,
                },
                _ => {
                    return Err(error::Failure::config(anyhow::anyhow!(
                        "give --synthetic or both --plates and --runs"
                    )))
                }
            };
            let config = TransferConfig {
                beta_transfer: t.beta,
                filter: t.filter,
                ml_source: t.ml_source,
                seed: t.seed,
                mode: t.ablation,
                residual_pilot: t.residual_pilot,
                ..TransferConfig::default()
            };
            commands::cmd_transfer(&TransferArgs {
                plates,
                config,
                out: t.out,
            })?;
        }
        Command::Synth {
            out,
            n,
            d,
            noise_std,
            seeds,
            check_budget,
            draws,
        } => {
            return commands::cmd_synth(&SynthArgs {
                out,
                n,
                d,
                noise_std,
                seeds,
                check_budget,
                draws,
            })
        }
        Command::Stats {
            p,
            m,
            paired,
            decimals,
            out,
        } => commands::cmd_stats(&StatsArgs {
            p,
            m,
            paired,
            decimals,
            out,
        })?,
        Command::Anonymize {
            input,
            output,
            mapping,
        } => commands::cmd_anonymize(&input, &output, &mapping)?,
    }
    Ok(true)
}

/// Output piped into a reader that quit early, e.g. `rescor predict | head`.
fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c
            .downcast_ref::<std::io::Error>()
            .or_else(|| match c.downcast_ref::<csv::Error>().map(|e| e.kind()) {
                Some(csv::ErrorKind::Io(io)) => Some(io),
                _ => None,
            });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) if broken_pipe(&f.error) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
