use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::{Deserialize, Serialize};

use rescor_core::base::BaseKind;
use rescor_core::data::{load_csv, read_feature_table, write_csv, write_sidecar, DataError, ROW_ID_COLUMN};
use rescor_core::ensemble::load_bundle;
use rescor_core::formula::parse_str;
use rescor_core::harness::{
    bh_correct, generate_synthetic, load_plates, oracle_eval, round_half_up, synthetic_plates,
    synthetic_source_runs, transfer_eval, variance_budget, wilcoxon_paired, MlSource, Plate, SourceFilter, SourceRun,
    SyntheticSpec, TransferConfig, TransferMode, TwoCohortSpec, COHORT_A,
};
use rescor_core::Task;

use crate::error::{CliResult, Failure};

fn create_writer(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

// ------------------------------------------------------------------ predict

pub struct PredictArgs {
    pub bundle: PathBuf,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub explain: bool,
    pub feature_map: Option<PathBuf>,
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let model = load_bundle(&args.bundle).map_err(|e| Failure::data(e).context("loading bundle"))?;
    // Bundles trained on anonymized data carry `feat_i` names; the map
    // translates them back to the columns of the input file.
    let columns: Vec<String> = match &args.feature_map {
        Some(path) => {
            let map: BTreeMap<String, String> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let back: BTreeMap<&str, &str> = map.iter().map(|(o, a)| (a.as_str(), o.as_str())).collect();
            model
                .feature_names
                .iter()
                .map(|n| back.get(n.as_str()).map_or(n.clone(), |o| o.to_string()))
                .collect()
        }
        None => model.feature_names.clone(),
    };
    let table = read_feature_table(&args.input, &columns, None)
        .map_err(|e| Failure::data(e).context(format!("reading {}", args.input.display())))?;
    let preds = model.predict(&table.features, &model.feature_names, &table.row_ids)?;

    let mut w = csv::Writer::from_writer(create_writer(args.output.as_deref())?);
    let classes = model.task.num_classes().unwrap_or(0);
    let mut header = vec![ROW_ID_COLUMN.to_string(), "prediction".into(), "base_prediction".into()];
    header.extend((1..=classes).map(|c| format!("prob_{c}")));
    header.push("fallback".into());
    if args.explain {
        for m in &model.mechanisms {
            let a = m.mechanism.agent;
            header.extend([format!("confidence_{a}"), format!("alpha_{a}")]);
            if classes == 0 {
                header.push(format!("delta_{a}"));
            }
        }
        if classes == 0 {
            // Zero unless the output clip binds; the explained terms then
            // sum to prediction - base_prediction exactly.
            header.push("clip_adjust".into());
        }
    }
    w.write_record(&header)?;
    for (id, p) in table.row_ids.iter().zip(&preds) {
        let mut rec = vec![id.to_string(), p.value.to_string(), p.base_value.to_string()];
        if let Some(probs) = &p.probs {
            rec.extend(probs.iter().map(|v| v.to_string()));
        }
        rec.push(p.fallback.to_string());
        if args.explain {
            for c in &p.contributions {
                rec.extend([c.confidence.to_string(), c.alpha.to_string()]);
                if classes == 0 {
                    rec.push(c.delta.map_or(String::new(), |d| d.to_string()));
                }
            }
            if classes == 0 {
                let explained: f64 = p.contributions.iter().map(|c| c.alpha * c.delta.unwrap_or(0.0)).sum();
                let adjust = p.value - p.base_value - explained;
                let adjust = if adjust.abs() <= 1e-12 * p.value.abs().max(1.0) { 0.0 } else { adjust };
                rec.push(adjust.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// ------------------------------------------------------------------ synth

pub struct SynthArgs {
    pub out: PathBuf,
    pub n: usize,
    pub d: usize,
    pub noise_std: f64,
    pub seeds: Vec<u64>,
    pub check_budget: bool,
    pub draws: usize,
}

/// Reference values and tolerances for the variance budget check.
pub const BUDGET_TARGETS: [(&str, f64, f64); 4] = [
    ("sigmoid", 0.31, 0.02),
    ("sin", 0.018, 0.005),
    ("noise", 0.01, 1e-15),
    ("ceiling", 0.97, 0.01),
];

#[derive(Serialize)]
struct BudgetCheck {
    term: &'static str,
    value: f64,
    target: f64,
    tolerance: f64,
    pass: bool,
}

/// Returns whether every requested check passed.
pub fn cmd_synth(args: &SynthArgs) -> CliResult<bool> {
    let spec = SyntheticSpec {
        n: args.n,
        d: args.d,
        noise_std: args.noise_std,
        seeds: args.seeds.clone(),
        ..SyntheticSpec::default()
    };
    spec.validate()?;
    std::fs::create_dir_all(&args.out)?;
    let mut oracle = Vec::new();
    for &seed in &spec.seeds {
        let data = generate_synthetic(&spec, seed)?;
        let path = args.out.join(format!("synth_seed{seed}.csv"));
        write_csv(&data.dataset, &path, "Y")?;
        write_sidecar(Task::Regression, &path)?;
        write_json(&args.out.join(format!("synth_seed{seed}_split.json")), &data.split)?;
        let report = oracle_eval(&spec, &data)?;
        println!(
            "seed {seed}: linear R2 {:.4}, oracle R2 {:.4}, oracle residual / noise {:.3}",
            report.linear_r2, report.oracle_r2, report.oracle_noise_ratio
        );
        oracle.push(report);
    }
    let mut w = csv::Writer::from_path(args.out.join("oracle.csv"))?;
    for r in &oracle {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut ok = true;
    let mut summary = serde_json::json!({ "spec": spec, "oracle": oracle });
    if args.check_budget {
        let b = variance_budget(&spec, args.draws, 0)?;
        let values = BTreeMap::from([("sigmoid", b.sigmoid), ("sin", b.sin), ("noise", b.noise), ("ceiling", b.ceiling)]);
        let checks: Vec<BudgetCheck> = BUDGET_TARGETS
            .iter()
            .map(|&(term, target, tolerance)| {
                let value = values[term];
                BudgetCheck {
                    term,
                    value,
                    target,
                    tolerance,
                    pass: (value - target).abs() <= tolerance,
                }
            })
            .collect();
        println!("variance budget over {} draws: linear {:.4}, total {:.4}", b.draws, b.linear, b.total);
        for c in &checks {
            println!(
                "  {:<8} {:.4} (target {} +- {}) {}",
                c.term,
                c.value,
                c.target,
                c.tolerance,
                if c.pass { "ok" } else { "MISMATCH" }
            );
        }
        ok = checks.iter().all(|c| c.pass);
        summary["budget"] = serde_json::to_value(&b)?;
        summary["budget_checks"] = serde_json::to_value(&checks)?;
    }
    write_json(&args.out.join("synth.json"), &summary)?;
    Ok(ok)
}

// ------------------------------------------------------------------ transfer

/// One entry of a runs manifest. Either `bundle` (a saved model directory)
/// or `formulas` (expressions over the source plate's features) is given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub id: String,
    pub source_plate: String,
    pub delta_r2_vs_ml: f64,
    #[serde(default)]
    pub bundle: Option<PathBuf>,
    #[serde(default)]
    pub formulas: Vec<String>,
    #[serde(default)]
    pub base: Option<String>,
}

pub enum PlateSource {
    Synthetic,
    Table {
        path: PathBuf,
        plate_column: String,
        cohort_column: String,
        target_column: String,
        runs: PathBuf,
    },
}

pub struct TransferArgs {
    pub plates: PlateSource,
    pub config: TransferConfig,
    pub out: PathBuf,
}

fn manifest_runs(path: &Path, plates: &[Plate]) -> CliResult<Vec<SourceRun>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(anyhow!("{}: {e}", path.display())))?;
    let entries: Vec<RunEntry> =
        serde_json::from_str(&text).map_err(|e| Failure::config(anyhow!("{}: {e}", path.display())))?;
    let mut runs = Vec::new();
    for e in entries {
        if let Some(dir) = &e.bundle {
            let dir = path.parent().unwrap_or(Path::new(".")).join(dir);
            runs.push(SourceRun::from_bundle(&dir, &e.id, &e.source_plate, e.delta_r2_vs_ml)?);
            continue;
        }
        let plate = plates
            .iter()
            .find(|p| p.id == e.source_plate)
            .ok_or_else(|| Failure::data(anyhow!("run {}: source plate `{}` not loaded", e.id, e.source_plate)))?;
        let names = plate.dataset.feature_names();
        let formulas = e
            .formulas
            .iter()
            .map(|f| parse_str(f, names))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|err| Failure::config(err).context(format!("run {}", e.id)))?;
        let base = match e.base.as_deref() {
            None | Some("linear") => BaseKind::Linear,
            Some("ridge") => BaseKind::Ridge { lambda: None },
            Some(other) => return Err(Failure::config(anyhow!("run {}: unsupported base `{other}`", e.id))),
        };
        runs.push(SourceRun {
            id: e.id,
            source_plate: e.source_plate,
            formulas,
            base,
            delta_r2_vs_ml: e.delta_r2_vs_ml,
        });
    }
    Ok(runs)
}

pub fn cmd_transfer(args: &TransferArgs) -> CliResult<()> {
    let (plates, runs) = match &args.plates {
        PlateSource::Synthetic => {
            let plates = synthetic_plates(&TwoCohortSpec::default())?;
            let runs = synthetic_source_runs(&plates, COHORT_A, &args.config)?;
            (plates, runs)
        }
        PlateSource::Table {
            path,
            plate_column,
            cohort_column,
            target_column,
            runs,
        } => {
            let plates = load_plates(path, plate_column, cohort_column, target_column)?;
            let runs = manifest_runs(runs, &plates)?;
            (plates, runs)
        }
    };
    let report = transfer_eval(&plates, &runs, &args.config)?;
    std::fs::create_dir_all(&args.out)?;
    report.write_csv(&args.out.join("transfer.csv"))?;
    report.write_json(&args.out.join("transfer.json"))?;
    println!(
        "{} runs used, {} filtered out, {} pairs, {} failed evaluations",
        report.runs_used.len(),
        report.runs_filtered_out.len(),
        report.records.len(),
        report.failures.len()
    );
    for (rel, a) in &report.by_relation {
        println!(
            "{rel:<7} {:>3}/{:<3} improving ({:.1}%), mean dMAE {:+.4}, mean dR2 {:+.4}",
            a.improved, a.pairs, a.pct_improving, a.mean_delta_mae, a.mean_delta_r2
        );
    }
    Ok(())
}

pub fn parse_mode(s: &str) -> Result<TransferMode, String> {
    match s {
        "headline" => Ok(TransferMode::Headline),
        "per-formula" => Ok(TransferMode::PerFormula),
        "formula-only" => Ok(TransferMode::FormulaOnly),
        "joint" => Ok(TransferMode::Joint),
        _ => Err(format!("unknown ablation `{s}` (headline, per-formula, formula-only, joint)")),
    }
}

pub fn parse_filter(s: &str) -> Result<SourceFilter, String> {
    match s {
        "filtered" => Ok(SourceFilter::Filtered),
        "unfiltered" => Ok(SourceFilter::Unfiltered),
        "below-filter" => Ok(SourceFilter::BelowFilterOnly),
        _ => Err(format!("unknown filter `{s}` (filtered, unfiltered, below-filter)")),
    }
}

pub fn parse_ml_source(s: &str) -> Result<MlSource, String> {
    match s {
        "auto" => Ok(MlSource::Auto),
        "transfer" => Ok(MlSource::Transfer),
        "retrain" => Ok(MlSource::Retrain),
        _ => Err(format!("unknown ml source `{s}` (auto, transfer, retrain)")),
    }
}

// ------------------------------------------------------------------ stats

pub struct StatsArgs {
    pub p: Vec<f64>,
    pub m: Option<usize>,
    pub paired: Option<PathBuf>,
    pub decimals: i32,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BhRow {
    index: usize,
    p: f64,
    q: f64,
    q_rounded: f64,
}

#[derive(Serialize)]
struct PairedReport {
    n: usize,
    w_plus: f64,
    p_value: f64,
    exact: bool,
}

fn read_pairs(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> CliResult<f64> {
            rec.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Failure::data(DataError::Parse(format!("row {i}: column {j} is not a number"))))
        };
        a.push(num(0)?);
        b.push(num(1)?);
    }
    Ok((a, b))
}

pub fn cmd_stats(args: &StatsArgs) -> CliResult<()> {
    if args.p.is_empty() && args.paired.is_none() {
        return Err(Failure::config(anyhow!("give --p values and/or --paired <csv>")));
    }
    let mut report = serde_json::Map::new();
    let mut bh_rows = None;
    if !args.p.is_empty() {
        let m = args.m.unwrap_or(args.p.len());
        let q = bh_correct(&args.p, m)?;
        let rows: Vec<BhRow> = args
            .p
            .iter()
            .zip(&q)
            .enumerate()
            .map(|(index, (&p, &q))| BhRow {
                index,
                p,
                q,
                q_rounded: round_half_up(q, args.decimals),
            })
            .collect();
        println!("{:>5} {:>10} {:>10}", "index", "p", "q");
        for r in &rows {
            println!("{:>5} {:>10} {:>10.*}", r.index, r.p, args.decimals as usize, r.q_rounded);
        }
        report.insert("m".into(), m.into());
        report.insert("bh".into(), serde_json::to_value(&rows)?);
        bh_rows = Some(rows);
    }
    if let Some(path) = &args.paired {
        let (a, b) = read_pairs(path)?;
        let w = wilcoxon_paired(&a, &b)?;
        println!(
            "wilcoxon signed-rank: n = {}, W+ = {}, p = {:.6} ({})",
            w.n,
            w.w_plus,
            w.p_value,
            if w.exact { "exact" } else { "normal approximation" }
        );
        report.insert(
            "wilcoxon".into(),
            serde_json::to_value(PairedReport {
                n: w.n,
                w_plus: w.w_plus,
                p_value: w.p_value,
                exact: w.exact,
            })?,
        );
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("stats.json"), &report)?;
        if let Some(rows) = &bh_rows {
            let mut w = csv::Writer::from_path(out.join("bh.csv"))?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ anonymize

pub fn cmd_anonymize(input: &Path, output: &Path, mapping: &Path) -> CliResult<()> {
    let ds = load_csv(input).map_err(|e| Failure::data(e).context(format!("loading {}", input.display())))?;
    let target = csv::Reader::from_path(input)?
        .headers()?
        .iter()
        .next_back()
        .map(|h| h.trim().to_string())
        .unwrap_or_else(|| "target".into());
    let aliases = rescor_core::data::anonymized_names(ds.num_features());
    let map: BTreeMap<String, String> = ds.feature_names().iter().cloned().zip(aliases.iter().cloned()).collect();
    let anon = ds.with_feature_names(aliases)?;
    write_csv(&anon, output, &target)?;
    write_sidecar(anon.task(), output)?;
    write_json(mapping, &map)?;
    println!("{} features renamed; mapping in {}", map.len(), mapping.display());
    Ok(())
}
