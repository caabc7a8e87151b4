use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::synthetic::{generate_synthetic, PlantedTerms, SyntheticSpec};
use super::HarnessError;
use crate::base::{fit, BaseKind};
use crate::data::{fit_scaler, make_split, regression_metrics, Dataset, Matrix, ScalerKind, Split, SplitSpec, Task};
use crate::ensemble::{load_bundle, Correction};
use crate::formula::{evaluate, parse_str, Bounds, FormulaAst};

/// One experimental batch with its cohort label.
#[derive(Debug, Clone)]
pub struct Plate {
    pub id: String,
    pub cohort: String,
    pub dataset: Dataset,
}

/// Frozen formulas from one training run on a source plate. Formula
/// outputs are read as absolute predictions on the scaled target.
#[derive(Debug, Clone)]
pub struct SourceRun {
    pub id: String,
    pub source_plate: String,
    pub formulas: Vec<FormulaAst>,
    pub base: BaseKind,
    /// R²(post) - R²(ML baseline) on the source plate.
    pub delta_r2_vs_ml: f64,
}

impl SourceRun {
    /// Reads the regression formulas of a saved bundle. `delta_r2_vs_ml`
    /// comes from the run's results file.
    pub fn from_bundle(dir: &Path, id: &str, source_plate: &str, delta_r2_vs_ml: f64) -> Result<Self, HarnessError> {
        let model = load_bundle(dir)?;
        let mut formulas = Vec::new();
        for m in &model.mechanisms {
            match &m.mechanism.correction {
                Correction::Regression(f) => formulas.push(f.clone()),
                Correction::Classification(_) => {
                    return Err(HarnessError::Config(format!("{}: transfer needs regression formulas", dir.display())))
                }
            }
        }
        let base = match &model.base {
            crate::base::BaseModel::Logistic(_) => {
                return Err(HarnessError::Config("transfer needs a regression base model".into()))
            }
            _ => BaseKind::Linear,
        };
        Ok(Self {
            id: id.into(),
            source_plate: source_plate.into(),
            formulas,
            base,
            delta_r2_vs_ml,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlSource {
    /// Train the ML model on the source plate.
    Transfer,
    /// Retrain it on the target plate's train split.
    Retrain,
    /// Source plate when it is among the loaded plates, otherwise retrain.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Average the run's formulas, then blend with ML.
    Headline,
    /// Each formula on its own, blended with ML.
    PerFormula,
    /// Averaged formulas, no ML blend.
    FormulaOnly,
    /// Each formula on its own, no ML blend.
    Joint,
}

impl TransferMode {
    pub const ALL: [TransferMode; 4] = [Self::Headline, Self::PerFormula, Self::FormulaOnly, Self::Joint];

    fn averaged(self) -> bool {
        matches!(self, Self::Headline | Self::FormulaOnly)
    }

    fn blended(self) -> bool {
        matches!(self, Self::Headline | Self::PerFormula)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFilter {
    /// Keep runs with `delta_r2_vs_ml > 0`.
    Filtered,
    Unfiltered,
    BelowFilterOnly,
}

impl SourceFilter {
    pub fn keeps(self, delta: f64) -> bool {
        match self {
            Self::Filtered => delta > 0.0,
            Self::Unfiltered => true,
            Self::BelowFilterOnly => delta <= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    pub beta_transfer: f64,
    pub filter: SourceFilter,
    pub ml_source: MlSource,
    pub train_fraction: f64,
    pub q_bins: usize,
    pub seed: u64,
    pub mode: TransferMode,
    /// `y = y_ml + (1 - beta) * (f - mean(y_train))` instead of the blend.
    pub residual_pilot: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            beta_transfer: 0.5,
            filter: SourceFilter::Filtered,
            ml_source: MlSource::Auto,
            train_fraction: 0.8,
            q_bins: 5,
            seed: 0,
            mode: TransferMode::Headline,
            residual_pilot: false,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(0.0..=1.0).contains(&self.beta_transfer) {
            return Err(HarnessError::Config(format!("beta_transfer = {} outside [0, 1]", self.beta_transfer)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(HarnessError::Config(format!("train_fraction = {}", self.train_fraction)));
        }
        if self.q_bins == 0 {
            return Err(HarnessError::Config("q_bins must be positive".into()));
        }
        Ok(())
    }

    fn split(&self, ds: &Dataset) -> Result<Split, HarnessError> {
        let spec = SplitSpec::new(self.train_fraction, 0.0, 1.0 - self.train_fraction, self.seed).stratified(self.q_bins);
        Ok(make_split(ds, &spec)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub source_run: String,
    pub source_plate: String,
    pub target_plate: String,
    pub target_cohort: String,
    /// `within` when the target shares the source plate's cohort.
    pub relation: String,
    /// Formula index in per-formula modes.
    pub formula: Option<usize>,
    pub delta_mae: f64,
    pub delta_r2: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedEvaluation {
    pub source_run: String,
    pub target_plate: String,
    pub formula: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pairs: usize,
    pub improved: usize,
    pub pct_improving: f64,
    pub mean_delta_mae: f64,
    pub mean_delta_r2: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub config: TransferConfig,
    pub runs_used: Vec<String>,
    pub runs_filtered_out: Vec<String>,
    pub records: Vec<TransferRecord>,
    pub failures: Vec<FailedEvaluation>,
    /// Keyed by `within` / `across`.
    pub by_relation: BTreeMap<String, Aggregate>,
    pub by_target: BTreeMap<String, Aggregate>,
}

impl TransferReport {
    pub fn pct_improving(&self, relation: &str) -> f64 {
        self.by_relation.get(relation).map_or(f64::NAN, |a| a.pct_improving)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io(e.to_string()))?;
        w.write_record(["source_run", "target_plate", "cohort", "formula", "delta_mae", "delta_r2", "improved"])
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        for r in &self.records {
            let formula = r.formula.map_or("avg".to_string(), |i| i.to_string());
            w.write_record([
                r.source_run.as_str(),
                &r.target_plate,
                &r.target_cohort,
                &formula,
                &r.delta_mae.to_string(),
                &r.delta_r2.to_string(),
                if r.improved { "true" } else { "false" },
            ])
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| HarnessError::Io(e.to_string()))
    }
}

/// ML model and scaler trained on one plate, ready to score another.
struct MlFit {
    scaler: crate::data::ScalerStats,
    model: crate::base::BaseModel,
    names: Vec<String>,
    train_mean: f64,
}

fn train_ml(plate: &Plate, kind: &BaseKind, cfg: &TransferConfig) -> Result<(MlFit, Split), HarnessError> {
    let split = cfg.split(&plate.dataset)?;
    let ds = &plate.dataset;
    let scaler = fit_scaler(ds.features(), &split.train, ScalerKind::MinMax010, &plate.id)?;
    let scaled = ds.with_features(scaler.apply(ds.features())?)?;
    let model = fit(kind, &scaled, &split.train)?;
    let train_mean = split.train.iter().map(|&i| ds.targets()[i]).sum::<f64>() / split.train.len() as f64;
    Ok((
        MlFit {
            scaler,
            model,
            names: ds.feature_names().to_vec(),
            train_mean,
        },
        split,
    ))
}

struct PairOutcome {
    y: Vec<f64>,
    ml: Vec<f64>,
    formulas: Vec<Result<Vec<f64>, String>>,
    train_mean: f64,
}

fn score_pair(run: &SourceRun, plates: &[Plate], target: &Plate, cfg: &TransferConfig) -> Result<PairOutcome, HarnessError> {
    let source = plates.iter().find(|p| p.id == run.source_plate);
    let ml_plate = match (cfg.ml_source, source) {
        (MlSource::Retrain, _) | (MlSource::Auto, None) => target,
        (MlSource::Transfer | MlSource::Auto, Some(s)) => s,
        (MlSource::Transfer, None) => {
            return Err(HarnessError::Config(format!(
                "ml_source = transfer but source plate {} is not loaded",
                run.source_plate
            )))
        }
    };
    let (ml, ml_split) = train_ml(ml_plate, &run.base, cfg)?;
    let test = if ml_plate.id == target.id {
        ml_split.test
    } else {
        cfg.split(&target.dataset)?.test
    };
    if target.dataset.feature_names() != ml.names.as_slice() {
        return Err(HarnessError::Config(format!("plate {} has a different schema", target.id)));
    }
    let x = ml.scaler.apply(&target.dataset.features().select_rows(&test))?;
    let ids = target.dataset.select_row_ids(&test);
    let ml_pred = ml.model.predict(&x, &ml.names, &ids)?.values;
    let formulas = run
        .formulas
        .iter()
        .map(|f| match evaluate(f, &x, &ml.names, Some(Bounds::new(0.0, 1.0))) {
            Ok(r) if !r.rejected => Ok(r.outputs),
            Ok(r) => Err(r.rejection_reason.unwrap_or_else(|| "rejected".into())),
            Err(e) => Err(e.to_string()),
        })
        .collect();
    Ok(PairOutcome {
        y: target.dataset.select_targets(&test),
        ml: ml_pred,
        formulas,
        train_mean: ml.train_mean,
    })
}

fn combine(ml: &[f64], f: &[f64], cfg: &TransferConfig, blended: bool, train_mean: f64) -> Vec<f64> {
    let b = cfg.beta_transfer;
    ml.iter()
        .zip(f)
        .map(|(m, f)| match (blended, cfg.residual_pilot) {
            (false, _) => *f,
            (true, false) => b * m + (1.0 - b) * f,
            (true, true) => m + (1.0 - b) * (f - train_mean),
        })
        .collect()
}

fn deltas(y: &[f64], ml: &[f64], pred: &[f64]) -> Result<(f64, f64), HarnessError> {
    let base = regression_metrics(y, ml)?;
    let new = regression_metrics(y, pred)?;
    let mae = base.mae.unwrap_or(f64::NAN) - new.mae.unwrap_or(f64::NAN);
    let r2 = new.r2.unwrap_or(f64::NAN) - base.r2.unwrap_or(f64::NAN);
    Ok((mae, r2))
}

/// Scores every (filtered source run, target plate) pair, skipping a run's
/// own plate.
pub fn transfer_eval(plates: &[Plate], runs: &[SourceRun], cfg: &TransferConfig) -> Result<TransferReport, HarnessError> {
    cfg.validate()?;
    let cohort_of: BTreeMap<&str, &str> = plates.iter().map(|p| (p.id.as_str(), p.cohort.as_str())).collect();
    let mut report = TransferReport {
        config: cfg.clone(),
        runs_used: Vec::new(),
        runs_filtered_out: Vec::new(),
        records: Vec::new(),
        failures: Vec::new(),
        by_relation: BTreeMap::new(),
        by_target: BTreeMap::new(),
    };
    for run in runs {
        if !cfg.filter.keeps(run.delta_r2_vs_ml) {
            report.runs_filtered_out.push(run.id.clone());
            continue;
        }
        let Some(src_cohort) = cohort_of.get(run.source_plate.as_str()) else {
            return Err(HarnessError::Config(format!(
                "run {}: source plate {} has no cohort label",
                run.id, run.source_plate
            )));
        };
        report.runs_used.push(run.id.clone());
        for target in plates.iter().filter(|p| p.id != run.source_plate) {
            let out = score_pair(run, plates, target, cfg)?;
            let relation = if target.cohort == *src_cohort { "within" } else { "across" };
            let mut candidates: Vec<(Option<usize>, Result<Vec<f64>, String>)> = Vec::new();
            if cfg.mode.averaged() {
                let avg = match out.formulas.iter().find_map(|f| f.as_ref().err()) {
                    Some(e) => Err(e.clone()),
                    None if out.formulas.is_empty() => Err("run has no formulas".into()),
                    None => {
                        let k = out.formulas.len() as f64;
                        let mut acc = vec![0.0; out.y.len()];
                        for f in out.formulas.iter().flatten() {
                            for (a, v) in acc.iter_mut().zip(f) {
                                *a += v / k;
                            }
                        }
                        Ok(acc)
                    }
                };
                candidates.push((None, avg));
            } else {
                candidates.extend(out.formulas.iter().cloned().enumerate().map(|(i, f)| (Some(i), f)));
            }
            for (formula, f) in candidates {
                match f {
                    Ok(f) => {
                        let pred = combine(&out.ml, &f, cfg, cfg.mode.blended(), out.train_mean);
                        let (delta_mae, delta_r2) = deltas(&out.y, &out.ml, &pred)?;
                        report.records.push(TransferRecord {
                            source_run: run.id.clone(),
                            source_plate: run.source_plate.clone(),
                            target_plate: target.id.clone(),
                            target_cohort: target.cohort.clone(),
                            relation: relation.into(),
                            formula,
                            delta_mae,
                            delta_r2,
                            improved: delta_mae > 0.0,
                        });
                    }
                    Err(reason) => {
                        report.by_relation.entry(relation.into()).or_default().failed += 1;
                        report.by_target.entry(target.id.clone()).or_default().failed += 1;
                        report.failures.push(FailedEvaluation {
                            source_run: run.id.clone(),
                            target_plate: target.id.clone(),
                            formula,
                            reason,
                        });
                    }
                }
            }
        }
    }
    for r in &report.records {
        add(report.by_relation.entry(r.relation.clone()).or_default(), r);
        add(report.by_target.entry(r.target_plate.clone()).or_default(), r);
    }
    for agg in report.by_relation.values_mut().chain(report.by_target.values_mut()) {
        finish(agg);
    }
    Ok(report)
}

fn add(agg: &mut Aggregate, r: &TransferRecord) {
    agg.pairs += 1;
    agg.improved += usize::from(r.improved);
    agg.mean_delta_mae += r.delta_mae;
    agg.mean_delta_r2 += r.delta_r2;
}

fn finish(agg: &mut Aggregate) {
    if agg.pairs > 0 {
        let n = agg.pairs as f64;
        agg.pct_improving = 100.0 * agg.improved as f64 / n;
        agg.mean_delta_mae /= n;
        agg.mean_delta_r2 /= n;
    } else {
        agg.pct_improving = f64::NAN;
    }
}

/// R²(headline) - R²(ML) of a run on its own plate, with ML trained on
/// that plate's train split.
pub fn source_delta_r2(run: &SourceRun, plate: &Plate, cfg: &TransferConfig) -> Result<f64, HarnessError> {
    let cfg = TransferConfig {
        ml_source: MlSource::Retrain,
        mode: TransferMode::Headline,
        ..cfg.clone()
    };
    let out = score_pair(run, std::slice::from_ref(plate), plate, &cfg)?;
    let mut avg = vec![0.0; out.y.len()];
    for f in &out.formulas {
        let Ok(f) = f else { return Ok(f64::NEG_INFINITY) };
        for (a, v) in avg.iter_mut().zip(f) {
            *a += v / out.formulas.len() as f64;
        }
    }
    let pred = combine(&out.ml, &avg, &cfg, true, out.train_mean);
    Ok(deltas(&out.y, &out.ml, &pred)?.1)
}

/// Least-squares `c0 + sum c_j * term_j` on the rows given, rendered as a
/// formula. Terms are formula strings over `names`.
pub fn fit_formula(terms: &[&str], features: &Matrix, names: &[String], y: &[f64], rows: &[usize]) -> Result<String, HarnessError> {
    let x = features.select_rows(rows);
    let mut cols = Vec::with_capacity(terms.len());
    for t in terms {
        let ast = parse_str(t, names)?;
        let r = evaluate(&ast, &x, names, None)?;
        if r.rejected {
            return Err(HarnessError::Config(format!("term `{t}` is not finite on the fit rows")));
        }
        cols.push(r.outputs);
    }
    let a = DMatrix::from_fn(rows.len(), terms.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| HarnessError::Config(format!("least squares failed: {e}")))?;
    let mut text = format!("{}", coef[0]);
    for (t, c) in terms.iter().zip(coef.iter().skip(1)) {
        let sign = if *c < 0.0 { '-' } else { '+' };
        text.push_str(&format!(" {sign} {} * ({t})", c.abs()));
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoCohortSpec {
    pub base: SyntheticSpec,
    pub cohort_a_seeds: Vec<u64>,
    pub cohort_b_seeds: Vec<u64>,
    /// Cohort B's planted law; only the sigmoid coefficients differ.
    pub cohort_b_terms: PlantedTerms,
}

impl Default for TwoCohortSpec {
    fn default() -> Self {
        Self {
            base: SyntheticSpec::default(),
            cohort_a_seeds: (0..5).collect(),
            cohort_b_seeds: (10..15).collect(),
            cohort_b_terms: PlantedTerms {
                a: 0.5,
                c: 1.2,
                ..PlantedTerms::default()
            },
        }
    }
}

pub const COHORT_A: &str = "A";
pub const COHORT_B: &str = "B";

/// Synthetic plates, targets min-max scaled to [0, 1] per plate so every
/// plate lives on the same bounded scale.
pub fn synthetic_plates(spec: &TwoCohortSpec) -> Result<Vec<Plate>, HarnessError> {
    let mut plates = Vec::new();
    let cohorts = [
        (COHORT_A, &spec.cohort_a_seeds, spec.base.terms),
        (COHORT_B, &spec.cohort_b_seeds, spec.cohort_b_terms),
    ];
    for (cohort, seeds, terms) in cohorts {
        let s = SyntheticSpec {
            terms,
            ..spec.base.clone()
        };
        for &seed in seeds {
            let data = generate_synthetic(&s, seed)?.dataset;
            let all: Vec<usize> = (0..data.len()).collect();
            let (lo, hi) = data.target_range(&all);
            let span = if hi > lo { hi - lo } else { 1.0 };
            let y = data.targets().iter().map(|v| (v - lo) / span).collect();
            plates.push(Plate {
                id: format!("{cohort}{seed}"),
                cohort: cohort.into(),
                dataset: data.with_targets(y)?,
            });
        }
    }
    Ok(plates)
}

/// Per-plate bases for synthetic source runs: a run that found the planted
/// sigmoid and one that only saw weak features.
pub const STRONG_RUN_TERMS: [&[&str]; 2] = [
    &["X1", "X2", "sigmoid(1.8 * X1 * X3 - 1.2)"],
    &["X1 * X3", "X1", "X2"],
];
pub const WEAK_RUN_TERMS: [&[&str]; 2] = [&["X5", "X6"], &["X4", "X8"]];

/// Two source runs per plate in `cohort`, with formulas fitted on the
/// plate's scaled train split and the filter score computed honestly.
pub fn synthetic_source_runs(plates: &[Plate], cohort: &str, cfg: &TransferConfig) -> Result<Vec<SourceRun>, HarnessError> {
    let mut runs = Vec::new();
    for plate in plates.iter().filter(|p| p.cohort == cohort) {
        let ds = &plate.dataset;
        let split = cfg.split(ds)?;
        let scaler = fit_scaler(ds.features(), &split.train, ScalerKind::MinMax010, &plate.id)?;
        let x = scaler.apply(ds.features())?;
        for (label, bases) in [("strong", STRONG_RUN_TERMS), ("weak", WEAK_RUN_TERMS)] {
            let mut formulas = Vec::new();
            for terms in bases {
                let text = fit_formula(terms, &x, ds.feature_names(), ds.targets(), &split.train)?;
                formulas.push(parse_str(&text, ds.feature_names())?);
            }
            let mut run = SourceRun {
                id: format!("{}-{label}", plate.id),
                source_plate: plate.id.clone(),
                formulas,
                base: BaseKind::Linear,
                delta_r2_vs_ml: 0.0,
            };
            run.delta_r2_vs_ml = source_delta_r2(&run, plate, cfg)?;
            runs.push(run);
        }
    }
    Ok(runs)
}

/// Reads a long-format plate table: one row per sample with a plate id
/// column, a cohort column, a target column, and the remaining columns as
/// features. Plates keep first-seen order.
pub fn load_plates(path: &Path, plate_column: &str, cohort_column: &str, target_column: &str) -> Result<Vec<Plate>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::Io(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::Io(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let (pc, cc, tc) = (find(plate_column)?, find(cohort_column)?, find(target_column)?);
    let feat: Vec<usize> = (0..headers.len()).filter(|j| ![pc, cc, tc].contains(j)).collect();
    let names: Vec<String> = feat.iter().map(|&j| headers[j].clone()).collect();
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (String, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Io(e.to_string()))?;
        let num = |j: usize| -> Result<f64, HarnessError> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("row {i}, column `{}`: `{}` is not a number", headers[j], &rec[j])))
        };
        let id = rec[pc].trim().to_string();
        let entry = acc.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (rec[cc].trim().to_string(), Vec::new(), Vec::new())
        });
        if entry.0 != rec[cc].trim() {
            return Err(HarnessError::Config(format!("plate {id} has more than one cohort label")));
        }
        for &j in &feat {
            entry.1.push(num(j)?);
        }
        entry.2.push(num(tc)?);
    }
    let mut plates = Vec::new();
    for id in order {
        let (cohort, data, y) = acc.remove(&id).expect("seen plate");
        let n = y.len();
        let ds = Dataset::new(Matrix::new(n, names.len(), data)?, names.clone(), y, Task::Regression)?;
        plates.push(Plate { id, cohort, dataset: ds });
    }
    Ok(plates)
}
