use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, FormulaAst, Func};
use super::FormulaError;
use crate::data::Matrix;

const EXP_CLAMP: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self {
            lo: -half_width,
            hi: half_width,
        }
    }

    pub fn clip(&self, v: f64) -> (f64, bool) {
        if v < self.lo {
            (self.lo, true)
        } else if v > self.hi {
            (self.hi, true)
        } else {
            (v, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub outputs: Vec<f64>,
    pub clip_events: usize,
    pub rejected: bool,
    pub rejection_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// N×C, one column per class.
    pub scores: Matrix,
    pub rejected: bool,
    pub rejection_reason: Option<String>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-EXP_CLAMP, EXP_CLAMP)).exp())
}

/// Temperature softmax with the exponent clamped like `sigmoid`.
pub fn softmax(scores: &[f64], tau: f64) -> Vec<f64> {
    let z: Vec<f64> = scores.iter().map(|s| s / tau).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).max(-EXP_CLAMP).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

fn eval_expr(e: &Expr, row: &[f64], map: &[usize]) -> f64 {
    match e {
        Expr::Num(v) => *v,
        Expr::Feature { index, .. } => row[map[*index]],
        Expr::Neg(e) => -eval_expr(e, row, map),
        Expr::Bin { op, lhs, rhs } => {
            let a = eval_expr(lhs, row, map);
            let b = eval_expr(rhs, row, map);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        }
        Expr::Call { func, args } => {
            let x = eval_expr(&args[0], row, map);
            match func {
                Func::Exp => x.exp(),
                Func::Log1p => x.ln_1p(),
                Func::Abs => x.abs(),
                Func::Sigmoid => sigmoid(x),
                Func::Max => nan_max(x, eval_expr(&args[1], row, map)),
                Func::Min => nan_min(x, eval_expr(&args[1], row, map)),
                Func::Clip => {
                    let lo = eval_expr(&args[1], row, map);
                    let hi = eval_expr(&args[2], row, map);
                    nan_min(nan_max(x, lo), hi)
                }
            }
        }
    }
}

impl FormulaAst {
    /// Maps each parse-time feature index to a column of a matrix whose
    /// columns are named `names`.
    pub fn column_map(&self, names: &[String]) -> Result<Vec<usize>, FormulaError> {
        let mut map = Vec::new();
        let mut walk = vec![self.expr()];
        while let Some(e) = walk.pop() {
            match e {
                Expr::Feature { name, index } => {
                    let col = names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| FormulaError::MissingColumn(name.clone()))?;
                    if map.len() <= *index {
                        map.resize(index + 1, usize::MAX);
                    }
                    map[*index] = col;
                }
                Expr::Neg(a) => walk.push(a),
                Expr::Bin { lhs, rhs, .. } => {
                    walk.push(lhs);
                    walk.push(rhs);
                }
                Expr::Call { args, .. } => walk.extend(args.iter()),
                Expr::Num(_) => {}
            }
        }
        Ok(map)
    }

    /// Raw value at one row, no bounds applied; may be non-finite.
    pub fn eval_row(&self, row: &[f64], map: &[usize]) -> f64 {
        eval_expr(self.expr(), row, map)
    }
}

pub fn evaluate(
    ast: &FormulaAst,
    features: &Matrix,
    names: &[String],
    bounds: Option<Bounds>,
) -> Result<EvalReport, FormulaError> {
    if names.len() != features.cols() {
        return Err(FormulaError::MissingColumn(format!(
            "{} names for {} columns",
            names.len(),
            features.cols()
        )));
    }
    let map = ast.column_map(names)?;
    let mut outputs: Vec<f64> = features.iter_rows().map(|r| ast.eval_row(r, &map)).collect();
    if let Some(i) = outputs.iter().position(|v| !v.is_finite()) {
        return Ok(EvalReport {
            rejection_reason: Some(format!(
                "non-finite value {} at row {i} for `{ast}`",
                outputs[i]
            )),
            outputs,
            clip_events: 0,
            rejected: true,
        });
    }
    let mut clip_events = 0;
    if let Some(b) = bounds {
        for v in outputs.iter_mut() {
            let (c, hit) = b.clip(*v);
            *v = c;
            clip_events += hit as usize;
        }
    }
    Ok(EvalReport {
        outputs,
        clip_events,
        rejected: false,
        rejection_reason: None,
    })
}

/// Evaluation that turns a rejection into an error, for generation-time checks.
pub fn validate(
    ast: &FormulaAst,
    features: &Matrix,
    names: &[String],
    bounds: Option<Bounds>,
) -> Result<EvalReport, FormulaError> {
    let report = evaluate(ast, features, names, bounds)?;
    if report.rejected {
        return Err(FormulaError::Numeric(
            report.rejection_reason.unwrap_or_default(),
        ));
    }
    Ok(report)
}

pub fn multiclass_scores(
    asts: &[FormulaAst],
    features: &Matrix,
    names: &[String],
) -> Result<ScoreReport, FormulaError> {
    if asts.len() < 2 {
        return Err(FormulaError::ClassCount {
            expected: 2,
            got: asts.len(),
        });
    }
    let c = asts.len();
    let mut scores = Matrix::zeros(features.rows(), c);
    let mut reason = None;
    for (k, ast) in asts.iter().enumerate() {
        let rep = evaluate(ast, features, names, None)?;
        if rep.rejected && reason.is_none() {
            reason = Some(format!("class {}: {}", k + 1, rep.rejection_reason.unwrap_or_default()));
        }
        for (i, v) in rep.outputs.into_iter().enumerate() {
            scores.set(i, k, v);
        }
    }
    Ok(ScoreReport {
        scores,
        rejected: reason.is_some(),
        rejection_reason: reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_str;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn eval1(src: &str, n: &[&str], row: &[f64]) -> EvalReport {
        let n = names(n);
        let ast = parse_str(src, &n).unwrap();
        evaluate(&ast, &Matrix::from_rows(&[row]).unwrap(), &n, None).unwrap()
    }

    #[test]
    fn rational_saturation() {
        let r = eval1("0.5*fol/(0.5+fol)", &["fol"], &[0.3]);
        assert!((r.outputs[0] - 0.1875).abs() < 1e-12);
    }

    #[test]
    fn refined_worked_example() {
        let r = eval1(
            "0.5*NAD*sperm + 0.5*fol/(0.5+fol)",
            &["NAD", "sperm", "fol"],
            &[0.8, 0.7, 0.3],
        );
        assert!((r.outputs[0] - 0.4675).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_and_clamp() {
        assert_eq!(eval1("sigmoid(0)", &["x"], &[0.0]).outputs[0], 0.5);
        assert!(sigmoid(-1e6) > 0.0 && sigmoid(f64::INFINITY) == sigmoid(60.0));
    }

    #[test]
    fn division_by_zero_rejected() {
        let r = eval1("1/x", &["x"], &[0.0]);
        assert!(r.rejected);
        assert!(r.rejection_reason.unwrap().contains("row 0"));
        assert!(eval1("log1p(x)", &["x"], &[-2.0]).rejected);
        assert!(eval1("max(log1p(x), 0)", &["x"], &[-2.0]).rejected);
    }

    #[test]
    fn bounds_count_clips() {
        let n = names(&["x"]);
        let ast = parse_str("x * 10", &n).unwrap();
        let m = Matrix::from_rows(&[[0.05], [0.5], [-1.0]]).unwrap();
        let r = evaluate(&ast, &m, &n, Some(Bounds::new(-1.0, 1.0))).unwrap();
        assert_eq!(r.outputs, vec![0.5, 1.0, -1.0]);
        assert_eq!(r.clip_events, 2);
    }

    #[test]
    fn missing_column_is_fault() {
        let ast = parse_str("a + b", &names(&["a", "b"])).unwrap();
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(
            evaluate(&ast, &m, &names(&["a"]), None),
            Err(FormulaError::MissingColumn(_))
        ));
    }

    #[test]
    fn columns_resolved_by_name() {
        let ast = parse_str("a - b", &names(&["a", "b"])).unwrap();
        let m = Matrix::from_rows(&[[10.0, 0.0, 3.0]]).unwrap();
        let r = evaluate(&ast, &m, &names(&["b", "z", "a"]), None).unwrap();
        assert_eq!(r.outputs, vec![-7.0]);
    }

    #[test]
    fn class_scores() {
        let n = names(&["x1"]);
        let asts = vec![parse_str("x1", &n).unwrap(), parse_str("0", &n).unwrap()];
        let r = multiclass_scores(&asts, &Matrix::from_rows(&[[1.0]]).unwrap(), &n).unwrap();
        assert_eq!(r.scores.row(0), &[1.0, 0.0]);

        let n = names(&["hair", "milk", "eggs"]);
        let ast = parse_str("1.1*hair + 1.3*milk + 0.8*hair*milk*(1-eggs)", &n).unwrap();
        let v = evaluate(&ast, &Matrix::from_rows(&[[1.0, 1.0, 0.0]]).unwrap(), &n, None).unwrap();
        assert!((v.outputs[0] - 3.2).abs() < 1e-12);
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&[1.0, 0.0], 1.0);
        assert!((p[0] - 0.7310585786300049).abs() < 1e-12);
        assert_eq!(softmax(&[2.0, 2.0, 2.0], 0.5), vec![1.0 / 3.0; 3]);
        let p = softmax(&[1.0, -1.0], 100.0);
        assert!(p.iter().all(|v| (v - 0.5).abs() < 0.01));
        let p = softmax(&[1e9, 0.0], 1.0);
        assert!(p[1] > 0.0);
    }
}
