//! Correction-formula language.
//!
//! A formula is a single infix expression over named features, numeric
//! literals, `+ - * /`, unary minus and a fixed set of functions:
//! `clip(x, lo, hi)`, `exp`, `log1p`, `abs`, `max`, `min`, `sigmoid`.
//! Function names may carry an `np.`/`numpy.` prefix and `maximum`/`minimum`
//! are accepted as aliases, since model-generated formulas often use them.
//! There is no power operator, no conditionals and no statements.
//!
//! Parsing resolves every identifier up front, so a [`FormulaAst`] is always
//! executable against any matrix that has the referenced columns.

mod ast;
mod eval;
mod extract;
mod lexer;
mod mechfile;
mod parser;

pub use ast::{lint, BinOp, Expr, FormulaAst, Func, Lint};
pub use eval::{evaluate, multiclass_scores, sigmoid, softmax, validate, Bounds, EvalReport, ScoreReport};
pub use extract::{extract_class_formulas, extract_formula};
pub use mechfile::{parse_mechanism_file, render_mechanism_file, MechanismBlock, MechanismFormulas};
pub use parser::{parse, parse_str, DEFAULT_NODE_BUDGET};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    LlmResponse,
    File,
    Inline,
}

/// Raw formula text and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaSource {
    pub text: String,
    pub origin: Origin,
}

impl FormulaSource {
    pub fn new(text: &str, origin: Origin) -> Result<Self, FormulaError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(FormulaError::Empty);
        }
        Ok(Self {
            text: text.to_string(),
            origin,
        })
    }

    pub fn inline(text: &str) -> Result<Self, FormulaError> {
        Self::new(text, Origin::Inline)
    }
}

/// The three regeneration causes a validator reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Syntax,
    Numeric,
    Type,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulaError {
    #[error("empty formula")]
    Empty,
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("blocked construct at {pos}: {construct}")]
    Blocked { pos: usize, construct: String },
    #[error("unknown feature `{name}` at {pos}")]
    UnknownFeature { pos: usize, name: String },
    #[error("`{func}` takes {expected} argument(s), got {got}")]
    Arity {
        func: String,
        expected: usize,
        got: usize,
    },
    #[error("formula has {count} nodes, budget is {max}")]
    NodeBudget { count: usize, max: usize },
    #[error("no line starting with `{0}` found in response")]
    Extraction(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("expected {expected} class formulas, got {got}")]
    ClassCount { expected: usize, got: usize },
    #[error("feature column `{0}` missing from input")]
    MissingColumn(String),
}

impl FormulaError {
    pub fn class(&self) -> FailureClass {
        match self {
            FormulaError::Empty
            | FormulaError::Syntax { .. }
            | FormulaError::Blocked { .. }
            | FormulaError::NodeBudget { .. }
            | FormulaError::Extraction(_) => FailureClass::Syntax,
            FormulaError::Numeric(_) => FailureClass::Numeric,
            FormulaError::UnknownFeature { .. }
            | FormulaError::Arity { .. }
            | FormulaError::ClassCount { .. }
            | FormulaError::MissingColumn(_) => FailureClass::Type,
        }
    }
}
