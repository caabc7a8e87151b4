//! Zero-LLM inference: global scores, query-aware confidence, attention
//! and the regression/classification combination rules.

mod bundle;
mod eval;
mod mechanism;
mod model;
mod score;
mod tune;

pub use bundle::{load_bundle, save_bundle, BUNDLE_FILE, BUNDLE_SCHEMA_VERSION, MECHANISMS_FILE};
pub use eval::{base_loss, corrected_predictions, global_score, loss, Corrected, EvalSettings, Truth};
pub use mechanism::{BoundCorrection, Correction, Mechanism};
pub use model::{Contribution, EnsembleModel, Hyper, Prediction, RetainedMechanism};
pub use score::{
    attention, blend, class_probs, confidence, global_score_regression, regression_tau,
    RegressionBounds, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_P_MIN, TAU_RANGE_FRACTION,
};
pub use tune::{tune, TuneReport, BETA_GRID, TAU_GRID};

use thiserror::Error;

use crate::base::BaseError;
use crate::formula::FormulaError;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("validation split is empty")]
    EmptyValidation,
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
