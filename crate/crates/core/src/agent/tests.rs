use super::*;
use crate::base::{fit, BaseKind};
use crate::data::{Matrix, Task};
use crate::Dataset;

fn quadratic() -> Dataset {
    let n = 40;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let a = i as f64 / n as f64 * 2.0 - 1.0;
        let b = ((i * 7) % n) as f64 / n as f64;
        rows.push(vec![a, b]);
        y.push(a + a * a);
    }
    Dataset::new(Matrix::from_rows(&rows).unwrap(), vec!["a".into(), "b".into()], y, Task::Regression).unwrap()
}

fn run(script: Vec<&str>, cfg: &AgentConfig) -> (TrainOutput, usize) {
    let ds = quadratic();
    let rows: Vec<usize> = (0..ds.len()).collect();
    let base = fit(&BaseKind::Linear, &ds, &rows).unwrap();
    let provider = ScriptedProvider::new(script.into_iter().map(String::from).collect());
    let ledger = CallLedger::new(&provider, CompletionParams::default());
    let tpl = Templates::default();
    let mut seen = Vec::new();
    let out = train(
        TrainInput {
            dataset: &ds,
            train_rows: &rows,
            base: &base,
            config: cfg,
            templates: &tpl,
        },
        &ledger,
        &mut |t, m| seen.push((t, m.len())),
    )
    .unwrap();
    assert_eq!(seen.len(), out.iterations.len());
    (out, provider.consumed())
}

fn small_config() -> AgentConfig {
    AgentConfig {
        k: 2,
        t: 2,
        b: 20,
        ..AgentConfig::default()
    }
}

#[test]
fn scripted_run_matches_call_budget() {
    let cfg = AgentConfig { b: 6, ..small_config() };
    let script = vec![
        "curvature is missing",
        "both ends are under-predicted",
        "The residual is quadratic in a.\nFormula: a * a - 0.33",
        "large errors at both ends",
        "second batch agrees",
        // rejected once: unknown feature
        "Formula: c * 2",
        "Add a constant.\nFormula: 0.1",
        "fine",
        "Keep it.\nFormula: a * a - 0.3333",
        "too small",
        "Scale it.\nFormula: 0.5 * a * a",
        "ok",
        "Same.\nFormula: a * a - 0.33",
        "ok",
        "Zero.\nFormula: 0",
    ];
    let (out, consumed) = run(script, &cfg);
    assert_eq!(out.pool.len(), 12);
    assert_eq!(out.expected_calls, count_calls(2, 2, 12, 6));
    assert_eq!(out.ledger.len(), out.expected_calls + out.regenerations.len());
    assert_eq!(consumed, out.ledger.len());
    assert_eq!(out.regenerations.len(), 1);
    assert_eq!(out.regenerations[0].agent, 1);
    assert_eq!(out.iterations.len(), 3);
    // agent 0 logs t = 0, 1, 2; losses are earliest-argmin
    assert_eq!(out.agents[0].log.len(), 3);
    let r0 = &out.reports[0];
    assert_eq!(r0.selected_iteration, Some(1));
    assert!(r0.retained);
    assert!(r0.log[1].loss < out.base_train_loss * 0.1);
}

#[test]
fn decode_failure_drops_agent() {
    let mut cfg = small_config();
    cfg.k = 1;
    cfg.t = 1;
    cfg.retry_budget = 1;
    let script = vec!["hypothesis", "Formula: import os", "Formula: a ** 2"];
    let (out, consumed) = run(script, &cfg);
    assert_eq!(consumed, 3);
    assert!(matches!(out.agents[0].status, AgentStatus::Dropped { .. }));
    assert!(out.model.mechanisms.is_empty());
    assert_eq!(out.regenerations.len(), 2);
}

#[test]
fn numeric_rejection_is_retried_with_message() {
    let mut cfg = small_config();
    cfg.k = 1;
    cfg.t = 0;
    let provider_script = vec!["h", "Formula: 1 / (a - a)", "Formula: a * a"];
    let (out, _) = run(provider_script, &cfg);
    assert_eq!(out.regenerations.len(), 1);
    assert_eq!(out.regenerations[0].class, Some(crate::formula::FailureClass::Numeric));
    assert!(out.agents[0].is_live());
}

#[test]
fn failure_set_orders_by_error() {
    use crate::ensemble::{Corrected, Truth};
    let p = Corrected::Regression(vec![0.0, 2.0, -1.0, 0.1]);
    let t = Truth::Regression(vec![0.0, 0.0, 0.0, 0.0]);
    let f = failure_set(&p, &t, 0.5);
    assert_eq!(f.iter().map(|f| f.position).collect::<Vec<_>>(), vec![1, 2]);

    let p = Corrected::Classification(vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.45, 0.55]]);
    let t = Truth::Classification(vec![0, 0, 0]);
    let f = failure_set(&p, &t, 0.5);
    assert_eq!(f.iter().map(|f| f.position).collect::<Vec<_>>(), vec![1, 2]);
    let names = vec!["x".to_string()];
    let m = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
    let table = failure_table(&f, &m, &names, 1);
    assert!(table.starts_with("x,y,prediction,error\n2"));
    assert!(table.contains("1 more rows"));
    assert_eq!(failure_table(&[], &m, &names, 20), NO_FAILURES);
}
