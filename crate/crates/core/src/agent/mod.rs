//! The training loop: encode high-residual evidence into a hypothesis,
//! decode it into a formula, then alternate critique and refinement.

mod config;
mod context;
mod provider;
mod state;
mod templates;
mod train;

pub use config::{count_calls, AgentConfig, DEFAULT_FAILURE_ROWS, DEFAULT_RETRY_BUDGET};
pub use context::{anonymize, build_context, scrub, AugmentedContext, Hypothesis};
pub use provider::{
    estimate_tokens, render_transcript, summarize, CallLedger, CallRole, CompletionParams, HttpProvider,
    HttpSettings, LedgerEntry, LedgerSummary, LlmProvider, ProviderError, RecordingProvider, ScriptedProvider,
    WireFormat,
};
pub use state::{formula_lines, AgentStatus, MechanismState, StateEntry};
pub use templates::{render, Templates, TEMPLATE_NAMES};
pub use train::{
    failure_set, failure_table, train, AgentReport, Failure, IterationRecord, Regeneration, TrainInput,
    TrainOutput, ALLOWED_OPERATORS, NO_FAILURES,
};

use thiserror::Error;

use crate::base::BaseError;
use crate::data::DataError;
use crate::formula::FormulaError;
use crate::residual::ResidualError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("template: {0}")]
    Template(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[cfg(test)]
mod tests;
