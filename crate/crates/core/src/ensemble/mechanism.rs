use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::formula::{
    parse_str, Bounds, FormulaAst, FormulaError, MechanismBlock, MechanismFormulas,
};

/// The executable half of a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Correction {
    Regression(FormulaAst),
    /// One score formula per class.
    Classification(Vec<FormulaAst>),
}

/// Column maps from a correction's formulas to some input schema.
#[derive(Debug, Clone)]
pub struct BoundCorrection<'a> {
    correction: &'a Correction,
    maps: Vec<Vec<usize>>,
}

impl Correction {
    pub fn formulas(&self) -> Vec<&FormulaAst> {
        match self {
            Correction::Regression(f) => vec![f],
            Correction::Classification(fs) => fs.iter().collect(),
        }
    }

    pub fn bind(&self, names: &[String]) -> Result<BoundCorrection<'_>, FormulaError> {
        let maps = self
            .formulas()
            .into_iter()
            .map(|f| f.column_map(names))
            .collect::<Result<_, _>>()?;
        Ok(BoundCorrection {
            correction: self,
            maps,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.formulas().iter().all(|f| f.is_zero())
    }

    /// Regression deltas over a matrix, clipped to `bounds`; `None` if any
    /// row is non-finite. Classification: raw scores per row.
    pub fn evaluate_rows(
        &self,
        features: &Matrix,
        names: &[String],
        bounds: Option<Bounds>,
    ) -> Result<Option<Vec<Vec<f64>>>, FormulaError> {
        let bound = self.bind(names)?;
        let mut out = Vec::with_capacity(features.rows());
        for row in features.iter_rows() {
            match bound.eval(row, bounds) {
                Some(v) => out.push(v),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }
}

impl BoundCorrection<'_> {
    /// One value for regression (clipped), C scores for classification;
    /// `None` when any value is non-finite.
    pub fn eval(&self, row: &[f64], bounds: Option<Bounds>) -> Option<Vec<f64>> {
        let vals: Vec<f64> = self
            .correction
            .formulas()
            .iter()
            .zip(&self.maps)
            .map(|(f, m)| f.eval_row(row, m))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return None;
        }
        match (self.correction, bounds) {
            (Correction::Regression(_), Some(b)) => Some(vec![b.clip(vals[0]).0]),
            _ => Some(vals),
        }
    }
}

/// Explanation plus correction, as produced by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub agent: usize,
    pub explanation: String,
    pub correction: Correction,
}

impl Mechanism {
    pub fn to_block(&self) -> MechanismBlock {
        MechanismBlock {
            id: self.agent,
            explanation: self.explanation.clone(),
            formulas: match &self.correction {
                Correction::Regression(f) => MechanismFormulas::Regression(f.to_string()),
                Correction::Classification(fs) => {
                    MechanismFormulas::Classification(fs.iter().map(|f| f.to_string()).collect())
                }
            },
        }
    }

    pub fn from_block(block: &MechanismBlock, names: &[String]) -> Result<Self, FormulaError> {
        let correction = match &block.formulas {
            MechanismFormulas::Regression(f) => Correction::Regression(parse_str(f, names)?),
            MechanismFormulas::Classification(fs) => Correction::Classification(
                fs.iter().map(|f| parse_str(f, names)).collect::<Result<_, _>>()?,
            ),
        };
        Ok(Self {
            agent: block.id,
            explanation: block.explanation.clone(),
            correction,
        })
    }
}
