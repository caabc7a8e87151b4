use super::*;
use crate::formula::sigmoid;

#[test]
fn zero_input_gives_the_closed_form_value() {
    let t = PlantedTerms::default();
    let x = [0.0; 8];
    // oracle: logistic evaluated by hand
    let expected = 2.5 / (1.0 + 1.2f64.exp());
    assert!((t.signal(&x) - expected).abs() < 1e-15);
    assert!((expected - 0.5787).abs() < 1e-4);
    assert_eq!(sigmoid(-1.2) * 2.5, t.sigmoid_term(&x));
}

#[test]
fn generator_is_deterministic_and_uniform() {
    let spec = SyntheticSpec::default();
    let a = generate_synthetic(&spec, 3).unwrap();
    let b = generate_synthetic(&spec, 3).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.split, b.split);
    assert_ne!(generate_synthetic(&spec, 4).unwrap().dataset, a.dataset);
    assert_eq!((a.split.train.len(), a.split.val.len(), a.split.test.len()), (600, 200, 200));
    for seed in spec.seeds.clone() {
        let d = generate_synthetic(&spec, seed).unwrap().dataset;
        for j in 0..spec.d {
            let col = d.features().column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            assert!((0.45..=0.55).contains(&mean), "seed {seed} X{} mean {mean}", j + 1);
        }
    }
}

#[test]
fn noiseless_targets_match_the_law() {
    let spec = SyntheticSpec {
        noise_std: 0.0,
        ..SyntheticSpec::default()
    };
    let d = generate_synthetic(&spec, 0).unwrap().dataset;
    for i in 0..d.len() {
        let x = d.features().row(i);
        let y = 0.6 * x[0] + 0.4 * x[1] + 2.5 / (1.0 + (-(1.8 * x[0] * x[2] - 1.2)).exp()) + 0.3 * (x[4] * x[6]).sin();
        assert!((d.targets()[i] - y).abs() < 1e-12);
    }
}

#[test]
fn oracle_residuals_are_noise() {
    let spec = SyntheticSpec::default();
    for seed in 0..5 {
        let r = oracle_eval(&spec, &generate_synthetic(&spec, seed).unwrap()).unwrap();
        assert!((0.7..=1.4).contains(&r.oracle_noise_ratio), "{r:?}");
        assert!(r.oracle_r2 > r.linear_r2);
    }
}

#[test]
fn budget_rejects_small_draws_and_noise_is_exact() {
    let spec = SyntheticSpec::default();
    assert!(variance_budget(&spec, 1000, 0).is_err());
    let b = variance_budget(&spec, 100_000, 0).unwrap();
    assert_eq!(b.noise, 0.1 * 0.1);
    assert!((b.ceiling - b.signal / (b.signal + b.noise)).abs() < 1e-15);
}

#[test]
fn fit_formula_recovers_exact_coefficients() {
    let spec = SyntheticSpec {
        noise_std: 0.0,
        ..SyntheticSpec::default()
    };
    let d = generate_synthetic(&spec, 1).unwrap().dataset;
    let y: Vec<f64> = (0..d.len()).map(|i| 0.25 - 2.0 * d.features().get(i, 0) + 0.5 * d.features().get(i, 3)).collect();
    let rows: Vec<usize> = (0..100).collect();
    let text = fit_formula(&["X1", "X4"], d.features(), d.feature_names(), &y, &rows).unwrap();
    let ast = crate::formula::parse_str(&text, d.feature_names()).unwrap();
    let out = crate::formula::evaluate(&ast, d.features(), d.feature_names(), None).unwrap().outputs;
    for (o, t) in out.iter().zip(&y) {
        assert!((o - t).abs() < 1e-9, "{text}");
    }
    assert!(text.contains("- 2"));
}

fn small_cohorts() -> (Vec<Plate>, Vec<SourceRun>, TransferConfig) {
    let spec = TwoCohortSpec {
        cohort_a_seeds: vec![0, 1, 2],
        cohort_b_seeds: vec![10, 11],
        base: SyntheticSpec {
            n: 400,
            ..SyntheticSpec::default()
        },
        ..TwoCohortSpec::default()
    };
    let plates = synthetic_plates(&spec).unwrap();
    let cfg = TransferConfig::default();
    let runs = synthetic_source_runs(&plates, COHORT_A, &cfg).unwrap();
    (plates, runs, cfg)
}

#[test]
fn self_transfer_of_a_strong_run_helps() {
    let (plates, runs, cfg) = small_cohorts();
    let strong = runs.iter().find(|r| r.id == "A0-strong").unwrap();
    assert!(strong.delta_r2_vs_ml > 0.0);
    let d = source_delta_r2(strong, &plates[0], &cfg).unwrap();
    assert_eq!(d, strong.delta_r2_vs_ml);
    let weak = runs.iter().find(|r| r.id == "A0-weak").unwrap();
    assert!(weak.delta_r2_vs_ml < 0.0);
}

#[test]
fn unfiltered_is_a_superset_of_filtered() {
    let (plates, runs, cfg) = small_cohorts();
    let filtered = transfer_eval(&plates, &runs, &cfg).unwrap();
    let all = transfer_eval(
        &plates,
        &runs,
        &TransferConfig {
            filter: SourceFilter::Unfiltered,
            ..cfg.clone()
        },
    )
    .unwrap();
    let key = |r: &TransferRecord| (r.source_run.clone(), r.target_plate.clone(), r.formula);
    for r in &filtered.records {
        let other = all.records.iter().find(|o| key(o) == key(r)).expect("pair missing from unfiltered run");
        assert_eq!(other, r);
    }
    assert!(all.records.len() > filtered.records.len());
    assert!(filtered.records.iter().all(|r| r.target_plate != r.source_plate));
}

#[test]
fn per_formula_modes_emit_one_record_per_formula() {
    let (plates, runs, cfg) = small_cohorts();
    let head = transfer_eval(&plates, &runs, &cfg).unwrap();
    let joint = transfer_eval(&plates, &runs, &TransferConfig { mode: TransferMode::Joint, ..cfg }).unwrap();
    assert_eq!(joint.records.len(), 2 * head.records.len());
    assert!(head.records.iter().all(|r| r.formula.is_none()));
}

#[test]
fn zero_formula_blend_is_worse_than_ml() {
    let (plates, _, cfg) = small_cohorts();
    let zero = SourceRun {
        id: "zero".into(),
        source_plate: "A0".into(),
        formulas: vec![crate::formula::parse_str("0", &[]).unwrap()],
        base: crate::base::BaseKind::Linear,
        delta_r2_vs_ml: 1.0,
    };
    let r = transfer_eval(&plates, &[zero], &cfg).unwrap();
    assert!(r.records.iter().all(|r| !r.improved && r.delta_mae < 0.0));
}

#[test]
fn non_finite_formula_is_a_failed_evaluation() {
    let (plates, _, cfg) = small_cohorts();
    let names = plates[0].dataset.feature_names().to_vec();
    let bad = SourceRun {
        id: "bad".into(),
        source_plate: "A0".into(),
        formulas: vec![crate::formula::parse_str("1 / (X1 - X1)", &names).unwrap()],
        base: crate::base::BaseKind::Linear,
        delta_r2_vs_ml: 1.0,
    };
    let r = transfer_eval(&plates, &[bad], &cfg).unwrap();
    assert!(r.records.is_empty());
    assert_eq!(r.failures.len(), plates.len() - 1);
    assert_eq!(r.by_relation["within"].failed + r.by_relation["across"].failed, plates.len() - 1);
}

#[test]
fn plate_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plates.csv");
    std::fs::write(&path, "plate,cohort,a,b,y\np1,A,1,2,0.5\np2,B,3,4,0.1\np1,A,5,6,0.7\n").unwrap();
    let plates = load_plates(&path, "plate", "cohort", "y").unwrap();
    assert_eq!(plates.len(), 2);
    assert_eq!(plates[0].id, "p1");
    assert_eq!(plates[0].dataset.len(), 2);
    assert_eq!(plates[0].dataset.feature_names(), ["a", "b"]);
    assert_eq!(plates[1].cohort, "B");
    std::fs::write(&path, "plate,cohort,a,y\np1,A,1,0.5\np1,B,3,0.1\n").unwrap();
    assert!(load_plates(&path, "plate", "cohort", "y").is_err());
}

#[test]
#[ignore]
fn explore_two_cohort_numbers() {
    let plates = synthetic_plates(&TwoCohortSpec::default()).unwrap();
    for ml in [MlSource::Auto, MlSource::Retrain] {
        let cfg = TransferConfig { ml_source: ml, ..TransferConfig::default() };
        let runs = synthetic_source_runs(&plates, COHORT_A, &cfg).unwrap();
        for r in &runs {
            eprintln!("{} {:.4}", r.id, r.delta_r2_vs_ml);
        }
        for mode in TransferMode::ALL {
            let rep = transfer_eval(&plates, &runs, &TransferConfig { mode, ..cfg.clone() }).unwrap();
            eprintln!("{ml:?} {mode:?} {:?}", rep.by_relation);
        }
    }
}
