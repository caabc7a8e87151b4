use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Clip,
    Exp,
    Log1p,
    Abs,
    Max,
    Min,
    Sigmoid,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "clip" => Func::Clip,
            "exp" => Func::Exp,
            "log1p" => Func::Log1p,
            "abs" => Func::Abs,
            "max" | "maximum" => Func::Max,
            "min" | "minimum" => Func::Min,
            "sigmoid" => Func::Sigmoid,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Clip => "clip",
            Func::Exp => "exp",
            Func::Log1p => "log1p",
            Func::Abs => "abs",
            Func::Max => "max",
            Func::Min => "min",
            Func::Sigmoid => "sigmoid",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Clip => 3,
            Func::Max | Func::Min => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// `index` is the position of the feature in the name list the formula was
/// parsed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Feature { name: String, index: usize },
    Neg(Box<Expr>),
    Bin { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { func: Func, args: Vec<Expr> },
}

impl Expr {
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Feature { .. } => 1,
            Expr::Neg(e) => 1 + e.node_count(),
            Expr::Bin { lhs, rhs, .. } => 1 + lhs.node_count() + rhs.node_count(),
            Expr::Call { args, .. } => 1 + args.iter().map(Expr::node_count).sum::<usize>(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Feature { .. } => 1,
            Expr::Neg(e) => e.leaf_count(),
            Expr::Bin { lhs, rhs, .. } => lhs.leaf_count() + rhs.leaf_count(),
            Expr::Call { args, .. } => args.iter().map(Expr::leaf_count).sum(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin { op, .. } => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 4,
        }
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(e) => e.walk(f),
            Expr::Bin { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    /// True when the subtree is a sum containing a positive literal term,
    /// e.g. `0.5 + fol` or `x + 1e-6`.
    fn has_additive_positive_literal(&self) -> bool {
        match self {
            Expr::Num(v) => *v > 0.0,
            Expr::Bin {
                op: BinOp::Add,
                lhs,
                rhs,
            } => lhs.has_additive_positive_literal() || rhs.has_additive_positive_literal(),
            Expr::Bin {
                op: BinOp::Sub, lhs, ..
            } => lhs.has_additive_positive_literal(),
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Feature { name, .. } => f.write_str(name),
            Expr::Neg(e) => {
                if e.precedence() < 3 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Bin { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            Expr::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A parsed formula. Printing gives text that reparses to the same tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaAst {
    expr: Expr,
}

impl FormulaAst {
    pub(crate) fn new(expr: Expr) -> Self {
        Self { expr }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn node_count(&self) -> usize {
        self.expr.node_count()
    }

    pub fn leaf_count(&self) -> usize {
        self.expr.leaf_count()
    }

    /// Referenced feature names, in first-use order, without duplicates.
    pub fn features(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.expr.walk(&mut |e| {
            if let Expr::Feature { name, .. } = e {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        });
        out
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.expr, Expr::Num(v) if v == 0.0)
    }
}

impl fmt::Display for FormulaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lint {
    UnguardedDivision { denominator: String },
}

impl fmt::Display for Lint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lint::UnguardedDivision { denominator } => write!(
                f,
                "division by `{denominator}` has no positive constant guarding the denominator"
            ),
        }
    }
}

pub fn lint(ast: &FormulaAst) -> Vec<Lint> {
    let mut out = Vec::new();
    ast.expr.walk(&mut |e| {
        if let Expr::Bin {
            op: BinOp::Div,
            rhs,
            ..
        } = e
        {
            let literal = matches!(**rhs, Expr::Num(v) if v != 0.0);
            if !literal && !rhs.has_additive_positive_literal() {
                out.push(Lint::UnguardedDivision {
                    denominator: rhs.to_string(),
                });
            }
        }
    });
    out
}
