//! Residual-correction ensembles.
//!
//! A base model predicts; a set of agents proposes closed-form correction
//! formulas for the rows it gets most wrong; an inference engine blends the
//! corrections back in, weighted by how good each formula was on training
//! data and how close the query sits to the evidence that produced it.

pub mod data;
pub mod agent;
pub mod base;
pub mod formula;
pub mod harness;
pub mod ensemble;
pub mod residual;

pub use data::{DataError, Dataset, Matrix, Task};
pub use base::{BaseKind, BaseModel};
pub use formula::{FormulaAst, FormulaError, FormulaSource};
