use serde::{Deserialize, Serialize};

use super::config::{count_calls, AgentConfig};
use super::context::{build_context, AugmentedContext};
use super::provider::{CallLedger, CallRole, LedgerEntry};
use super::state::{formula_lines, AgentStatus, MechanismState, StateEntry};
use super::templates::{render, Templates};
use super::AgentError;
use crate::base::{BaseModel, BasePrediction};
use crate::data::{anonymized_names, Dataset, Matrix, Task};
use crate::ensemble::{
    base_loss, blend, class_probs, corrected_predictions, global_score, loss, regression_tau, Corrected, Correction,
    EnsembleModel, EvalSettings, Hyper, Mechanism, RegressionBounds, RetainedMechanism, Truth,
};
use crate::formula::{
    extract_class_formulas, extract_formula, lint, parse, FailureClass, FormulaError,
};
use crate::residual::{fmt_num, residuals, select_pool, HighResidualPool};

pub const ALLOWED_OPERATORS: &str = "+ - * / and parentheses, numeric constants, feature names, \
clip(x, lo, hi), exp(x), log1p(x), abs(x), max(x, y), min(x, y), sigmoid(x)";
pub const NO_FAILURES: &str = "(no failures: every training row is within the error threshold)";

/// A row the current ensemble gets wrong by more than tau_fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    /// Position within the training rows.
    pub position: usize,
    pub y: f64,
    /// Regression prediction, or probability of the true class.
    pub prediction: f64,
    pub error: f64,
}

/// Regression: |y_hat - y| > tau_fail. Classification: p_y < 1 - tau_fail.
/// Sorted by error, largest first.
pub fn failure_set(predictions: &Corrected, truth: &Truth, tau_fail: f64) -> Vec<Failure> {
    let mut out: Vec<Failure> = match (predictions, truth) {
        (Corrected::Regression(p), Truth::Regression(y)) => p
            .iter()
            .zip(y)
            .enumerate()
            .filter(|(_, (p, y))| (*p - *y).abs() > tau_fail)
            .map(|(i, (p, y))| Failure {
                position: i,
                y: *y,
                prediction: *p,
                error: (p - y).abs(),
            })
            .collect(),
        (Corrected::Classification(p), Truth::Classification(y)) => p
            .iter()
            .zip(y)
            .enumerate()
            .filter(|(_, (p, &y))| p[y] < 1.0 - tau_fail)
            .map(|(i, (p, &y))| Failure {
                position: i,
                y: (y + 1) as f64,
                prediction: p[y],
                error: 1.0 - p[y],
            })
            .collect(),
        _ => Vec::new(),
    };
    out.sort_by(|a, b| b.error.total_cmp(&a.error).then(a.position.cmp(&b.position)));
    out
}

pub fn failure_table(failures: &[Failure], features: &Matrix, names: &[String], max_rows: usize) -> String {
    if failures.is_empty() {
        return NO_FAILURES.to_string();
    }
    let mut s = names.join(",");
    s.push_str(",y,prediction,error\n");
    for f in failures.iter().take(max_rows) {
        let row: Vec<String> = features.row(f.position).iter().map(|v| fmt_num(*v)).collect();
        s.push_str(&row.join(","));
        s.push_str(&format!(",{},{},{}\n", fmt_num(f.y), fmt_num(f.prediction), fmt_num(f.error)));
    }
    if failures.len() > max_rows {
        s.push_str(&format!("({} more rows not shown)\n", failures.len() - max_rows));
    }
    s
}

/// A rejected generation that triggered another attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regeneration {
    pub agent: usize,
    pub stage: String,
    pub attempt: usize,
    pub class: Option<FailureClass>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub hypothesis: String,
    pub explanation: String,
    pub formulas: Vec<String>,
    pub loss: f64,
    pub critique: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: usize,
    #[serde(flatten)]
    pub status: AgentStatus,
    pub log: Vec<IterationRecord>,
    pub skips: Vec<(usize, String)>,
    pub selected_iteration: Option<usize>,
    pub p: Option<f64>,
    pub retained: bool,
}

pub struct TrainInput<'a> {
    pub dataset: &'a Dataset,
    pub train_rows: &'a [usize],
    pub base: &'a BaseModel,
    pub config: &'a AgentConfig,
    pub templates: &'a Templates,
}

pub struct TrainOutput {
    pub model: EnsembleModel,
    pub agents: Vec<MechanismState>,
    pub reports: Vec<AgentReport>,
    pub pool: HighResidualPool,
    pub expected_calls: usize,
    pub ledger: Vec<LedgerEntry>,
    pub regenerations: Vec<Regeneration>,
    /// Live mechanisms after each iteration, index t = 0..=T.
    pub iterations: Vec<Vec<Mechanism>>,
    pub base_train_loss: f64,
}

struct Env<'a> {
    ds: &'a Dataset,
    cfg: &'a AgentConfig,
    tpl: &'a Templates,
    ledger: &'a CallLedger<'a>,
    ctx: AugmentedContext,
    x: Matrix,
    base_pred: BasePrediction,
    truth: Truth,
    settings: EvalSettings,
    num_classes: Option<usize>,
    regenerations: Vec<Regeneration>,
}

fn explanation_of(resp: &str) -> String {
    resp.lines()
        .filter(|l| !l.trim_start().starts_with("Formula"))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

impl Env<'_> {
    fn names(&self) -> &[String] {
        self.ds.feature_names()
    }

    fn formula_format(&self) -> String {
        match self.num_classes {
            None => "End your answer with exactly one line of the form\nFormula: <expression>".into(),
            Some(c) => format!(
                "End your answer with one score line per class, classes 1 to {c}; a softmax turns the scores into probabilities:\n{}",
                (1..=c).map(|i| format!("Formula[{i}]: <score for class {i}>")).collect::<Vec<_>>().join("\n")
            ),
        }
    }

    fn evaluate(&self, c: &Correction) -> Result<Option<Corrected>, FormulaError> {
        corrected_predictions(c, &self.x, self.names(), &self.base_pred, &self.settings)
    }

    fn parse_response(&self, resp: &str) -> Result<(String, Correction), FormulaError> {
        let correction = match self.num_classes {
            None => Correction::Regression(parse(&extract_formula(resp)?, self.names())?),
            Some(c) => Correction::Classification(
                extract_class_formulas(resp, c)?
                    .iter()
                    .map(|s| parse(s, self.names()))
                    .collect::<Result<_, _>>()?,
            ),
        };
        for f in correction.formulas() {
            for l in lint(f) {
                log::warn!("{l}");
            }
        }
        if correction.evaluate_rows(&self.x, self.names(), None)?.is_none() {
            return Err(FormulaError::Numeric(
                "the formula produces NaN or infinite values on training rows".into(),
            ));
        }
        Ok((explanation_of(resp), correction))
    }

    /// Asks for text until a nonempty response arrives.
    fn ask_text(&mut self, role: CallRole, agent: usize, stage: &str, prompt: &str) -> Result<Option<String>, AgentError> {
        for attempt in 0..=self.cfg.retry_budget {
            let r = self.ledger.call(role, attempt, prompt)?;
            if !r.trim().is_empty() {
                return Ok(Some(r));
            }
            self.regenerations.push(Regeneration {
                agent,
                stage: stage.into(),
                attempt,
                class: None,
                message: "empty response".into(),
            });
        }
        Ok(None)
    }

    /// Asks for a mechanism until one parses and validates; the error
    /// message of a rejected attempt is appended to the next prompt.
    fn ask_mechanism(
        &mut self,
        role: CallRole,
        agent: usize,
        stage: &str,
        prompt: &str,
    ) -> Result<Result<(String, Correction), String>, AgentError> {
        let mut last = String::new();
        for attempt in 0..=self.cfg.retry_budget {
            let p = if attempt == 0 {
                prompt.to_string()
            } else {
                format!(
                    "{prompt}\n\nYour previous answer was rejected: {last}\nAnswer again in the same format with a corrected formula."
                )
            };
            let resp = self.ledger.call(role, attempt, &p)?;
            match self.parse_response(&resp) {
                Ok(m) => return Ok(Ok(m)),
                Err(e) => {
                    log::info!("agent {agent} {stage} attempt {attempt} rejected: {e}");
                    self.regenerations.push(Regeneration {
                        agent,
                        stage: stage.into(),
                        attempt,
                        class: Some(e.class()),
                        message: e.to_string(),
                    });
                    last = e.to_string();
                }
            }
        }
        Ok(Err(last))
    }

    fn domain(&self) -> Option<&str> {
        self.ctx.domain.as_deref()
    }

    fn encode(&mut self, k: usize) -> Result<Option<String>, AgentError> {
        let n = self.ctx.batches.len();
        let mut parts = Vec::with_capacity(n);
        for b in 0..n {
            let prompt = render(
                self.tpl.encoder(k),
                &[
                    ("features", Some(&self.ctx.features_text)),
                    ("domain_context", self.domain()),
                    ("base_model", Some(&self.ctx.base_digest)),
                    ("batch_index", Some(&(b + 1).to_string())),
                    ("batch_count", Some(&n.to_string())),
                    ("high_residual_table", Some(&self.ctx.batch_tables[b])),
                ],
            )?;
            match self.ask_text(CallRole::Encode { agent: k, batch: b }, k, "encode", &prompt)? {
                Some(r) => parts.push(r),
                None => return Ok(None),
            }
        }
        if parts.len() == 1 {
            return Ok(parts.pop());
        }
        Ok(Some(
            parts
                .iter()
                .enumerate()
                .map(|(i, p)| format!("--- batch {} of {n} ---\n{}", i + 1, p.trim_end()))
                .collect::<Vec<_>>()
                .join("\n\n"),
        ))
    }

    fn decode(&mut self, k: usize, z: &str) -> Result<Result<(String, Correction), String>, AgentError> {
        let prompt = render(
            &self.tpl.decoder,
            &[
                ("hypothesis", Some(z)),
                ("feature_names", Some(&self.names().join(", "))),
                ("allowed_operators", Some(ALLOWED_OPERATORS)),
                ("formula_format", Some(&self.formula_format())),
            ],
        )?;
        self.ask_mechanism(CallRole::Decode { agent: k }, k, "decode", &prompt)
    }

    fn mechanism_loss(&self, c: &Correction) -> Result<f64, AgentError> {
        Ok(loss(self.evaluate(c)?.as_ref(), &self.truth))
    }

    /// Train predictions of the live mechanisms with uniform weights.
    fn snapshot(&self, live: &[&Correction]) -> Result<Corrected, AgentError> {
        let names = self.names();
        let mut outs = Vec::new();
        for c in live {
            if let Some(o) = c.evaluate_rows(&self.x, names, self.settings.bounds.map(|b| b.delta))? {
                outs.push(o);
            }
        }
        let w = if outs.is_empty() { 0.0 } else { 1.0 / outs.len() as f64 };
        Ok(match &self.base_pred.probs {
            None => Corrected::Regression(
                self.base_pred
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let shift: f64 = outs.iter().map(|o| w * o[i][0]).sum();
                        match self.settings.bounds {
                            Some(bd) => bd.apply(*b, shift),
                            None => b + shift,
                        }
                    })
                    .collect(),
            ),
            Some(p) => {
                if outs.is_empty() {
                    Corrected::Classification(p.clone())
                } else {
                    Corrected::Classification(
                        p.iter()
                            .enumerate()
                            .map(|(i, pml)| {
                                let qs: Vec<Vec<f64>> =
                                    outs.iter().map(|o| class_probs(&o[i], self.settings.tau_k)).collect();
                                blend(pml, &qs, &vec![w; qs.len()], self.settings.beta)
                            })
                            .collect(),
                    )
                }
            }
        })
    }
}

fn record(e: &StateEntry) -> IterationRecord {
    IterationRecord {
        iteration: e.iteration,
        hypothesis: e.hypothesis.clone(),
        explanation: e.explanation.clone(),
        formulas: e.correction.formulas().iter().map(|f| f.to_string()).collect(),
        loss: e.loss,
        critique: e.critique.clone(),
    }
}

/// Runs the full training procedure. `on_iteration` receives the live
/// mechanisms after the initial decode (t = 0) and after each refinement
/// round, so callers can persist progress even if a later call fails.
pub fn train(
    input: TrainInput<'_>,
    ledger: &CallLedger<'_>,
    on_iteration: &mut dyn FnMut(usize, &[Mechanism]),
) -> Result<TrainOutput, AgentError> {
    let TrainInput {
        dataset: ds,
        train_rows,
        base,
        config: cfg,
        templates: tpl,
    } = input;
    cfg.validate()?;
    if train_rows.is_empty() {
        return Err(AgentError::Config("no training rows".into()));
    }
    if cfg.anonymize_features && ds.feature_names() != anonymized_names(ds.num_features()).as_slice() {
        return Err(AgentError::Config(
            "anonymize_features is set but the dataset still carries its original feature names".into(),
        ));
    }
    let table = residuals(base, ds, train_rows)?;
    let pool = select_pool(&table, cfg.kappa, ds, cfg.gamma_s)?;
    let ctx = build_context(ds, &pool, cfg, base)?;
    let base_pred = base.predict_rows(ds, train_rows)?;
    let truth = Truth::from_rows(ds, train_rows);
    let (lo, hi) = ds.target_range(train_rows);
    let bounds = match ds.task() {
        Task::Regression => Some(RegressionBounds::from_targets(lo, hi)),
        Task::Classification { .. } => None,
    };
    let mut env = Env {
        ds,
        cfg,
        tpl,
        ledger,
        ctx,
        x: ds.features().select_rows(train_rows),
        base_pred,
        truth,
        settings: EvalSettings {
            bounds,
            beta: cfg.beta,
            tau_k: 1.0,
        },
        num_classes: ds.task().num_classes(),
        regenerations: Vec::new(),
    };
    let base_train_loss = base_loss(&env.base_pred, &env.truth);

    let mut agents: Vec<MechanismState> = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let Some(z) = env.encode(k)? else {
            agents.push(MechanismState::dropped(k, "encode", "empty responses after all retries".into()));
            continue;
        };
        match env.decode(k, &z)? {
            Ok((explanation, correction)) => {
                let loss = env.mechanism_loss(&correction)?;
                agents.push(MechanismState {
                    agent: k,
                    status: AgentStatus::Live,
                    log: vec![StateEntry {
                        iteration: 0,
                        hypothesis: z,
                        explanation,
                        correction,
                        loss,
                        critique: None,
                    }],
                    skips: Vec::new(),
                });
            }
            Err(reason) => agents.push(MechanismState::dropped(k, "decode", reason)),
        }
    }

    let live_mechanisms = |agents: &[MechanismState]| -> Vec<Mechanism> {
        agents
            .iter()
            .filter(|a| a.is_live())
            .map(|a| a.mechanism_at(a.log.len() - 1))
            .collect()
    };
    let mut iterations = vec![live_mechanisms(&agents)];
    on_iteration(0, &iterations[0]);

    for t in 0..cfg.t {
        let current: Vec<&Correction> = agents
            .iter()
            .filter(|a| a.is_live())
            .filter_map(|a| a.current().map(|e| &e.correction))
            .collect();
        if current.is_empty() {
            break;
        }
        let snap = env.snapshot(&current)?;
        let failures = failure_set(&snap, &env.truth, cfg.tau_fail);
        let ftable = failure_table(&failures, &env.x, env.names(), cfg.failure_rows);
        for a in agents.iter_mut().filter(|a| a.is_live()) {
            let k = a.agent;
            let cur = a.current().expect("live agent has an entry").clone();
            let prompt = render(
                &tpl.critique,
                &[
                    ("hypothesis", Some(&cur.hypothesis)),
                    ("explanation", Some(&cur.explanation)),
                    ("formula", Some(formula_lines(&cur.correction).trim_end())),
                    ("loss", Some(&format!("{:.6}", cur.loss))),
                    ("failure_table", Some(&ftable)),
                ],
            )?;
            let Some(g) = env.ask_text(CallRole::Critique { agent: k, iteration: t }, k, "critique", &prompt)? else {
                log::warn!("agent {k}: empty critique at iteration {t}; keeping the current mechanism");
                a.skips.push((t + 1, "empty critique".into()));
                continue;
            };
            a.log.last_mut().unwrap().critique = Some(g);
            let prompt = render(
                &tpl.refine,
                &[
                    ("features", Some(&env.ctx.features_text)),
                    ("domain_context", env.ctx.domain.as_deref()),
                    ("high_residual_table", Some(&env.ctx.batch_tables[0])),
                    ("state", Some(&a.history_text())),
                    ("allowed_operators", Some(ALLOWED_OPERATORS)),
                    ("formula_format", Some(&env.formula_format())),
                ],
            )?;
            match env.ask_mechanism(CallRole::Refine { agent: k, iteration: t }, k, "refine", &prompt)? {
                Ok((explanation, correction)) => {
                    let loss = env.mechanism_loss(&correction)?;
                    a.log.push(StateEntry {
                        iteration: t + 1,
                        hypothesis: explanation.clone(),
                        explanation,
                        correction,
                        loss,
                        critique: None,
                    });
                }
                Err(reason) => {
                    log::warn!("agent {k}: refinement at iteration {t} failed ({reason}); keeping the current mechanism");
                    a.skips.push((t + 1, reason));
                }
            }
        }
        iterations.push(live_mechanisms(&agents));
        on_iteration(t + 1, iterations.last().unwrap());
    }

    let tau = regression_tau(lo, hi);
    let mut retained = Vec::new();
    let mut reports = Vec::new();
    for a in &agents {
        let mut report = AgentReport {
            agent: a.agent,
            status: a.status.clone(),
            log: a.log.iter().map(record).collect(),
            skips: a.skips.clone(),
            selected_iteration: None,
            p: None,
            retained: false,
        };
        if let Some(best) = a.best() {
            let mech = a.mechanism_at(best);
            let p = global_score(env.evaluate(&mech.correction)?.as_ref(), &env.truth, tau);
            report.selected_iteration = Some(a.log[best].iteration);
            report.p = Some(p);
            report.retained = p > cfg.p_min;
            if report.retained {
                retained.push(RetainedMechanism {
                    mechanism: mech,
                    p,
                    tau_k: 1.0,
                    iteration: a.log[best].iteration,
                    pool: pool.clone(),
                });
            } else {
                log::info!("agent {}: global score {p:.4} not above p_min; mechanism discarded", a.agent);
            }
        }
        reports.push(report);
    }
    let model = EnsembleModel {
        base: base.clone(),
        feature_names: ds.feature_names().to_vec(),
        task: ds.task(),
        mechanisms: retained,
        hyper: Hyper {
            beta: cfg.beta,
            gamma: cfg.gamma,
            tau,
            p_min: cfg.p_min,
        },
        bounds,
    };
    Ok(TrainOutput {
        model,
        expected_calls: count_calls(cfg.k, cfg.t, pool.len(), cfg.b),
        pool,
        agents,
        reports,
        ledger: ledger.entries(),
        regenerations: env.regenerations,
        iterations,
        base_train_loss,
    })
}
