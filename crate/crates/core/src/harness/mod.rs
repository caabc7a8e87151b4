//! Planted-ground-truth benchmark, cross-plate transfer and significance
//! statistics.

mod stats;
mod synthetic;
mod transfer;

pub use stats::{bh_correct, round_half_up, wilcoxon_paired, WilcoxonResult, EXACT_MAX_N};
pub use synthetic::{
    generate_synthetic, oracle_eval, variance_budget, OracleReport, PlantedTerms, SyntheticData, SyntheticSpec,
    VarianceBudget,
};
pub use transfer::{
    fit_formula, load_plates, source_delta_r2, synthetic_plates, synthetic_source_runs, transfer_eval, Aggregate,
    FailedEvaluation, MlSource, Plate, SourceFilter, SourceRun, TransferConfig, TransferMode, TransferRecord,
    TransferReport, TwoCohortSpec, COHORT_A, COHORT_B, STRONG_RUN_TERMS, WEAK_RUN_TERMS,
};

use thiserror::Error;

use crate::base::BaseError;
use crate::data::DataError;
use crate::ensemble::EnsembleError;
use crate::formula::FormulaError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[cfg(test)]
mod tests;
