use std::fmt;

use rescor_core::agent::{AgentError, ProviderError};
use rescor_core::base::BaseError;
use rescor_core::ensemble::EnsembleError;
use rescor_core::harness::HarnessError;
use rescor_core::residual::ResidualError;
use rescor_core::{DataError, FormulaError};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_DATA: i32 = 4;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_CONFIG,
            error: e.into(),
        }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_DATA,
            error: e.into(),
        }
    }

    pub fn provider(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_PROVIDER,
            error: e.into(),
        }
    }

    pub fn context(mut self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        self.error = self.error.context(msg);
        self
    }
}

pub type CliResult<T> = Result<T, Failure>;

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Self::data(e)
    }
}

impl From<BaseError> for Failure {
    fn from(e: BaseError) -> Self {
        Self::data(e)
    }
}

impl From<ResidualError> for Failure {
    fn from(e: ResidualError) -> Self {
        match e {
            ResidualError::Kappa(_) | ResidualError::GammaS(_) | ResidualError::BatchSize => Self::config(e),
            _ => Self::data(e),
        }
    }
}

impl From<FormulaError> for Failure {
    fn from(e: FormulaError) -> Self {
        Self::data(e)
    }
}

impl From<ProviderError> for Failure {
    fn from(e: ProviderError) -> Self {
        Self::provider(e)
    }
}

impl From<EnsembleError> for Failure {
    fn from(e: EnsembleError) -> Self {
        Self::data(e)
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Provider(_) => Self::provider(e),
            AgentError::Config(_) | AgentError::Template(_) => Self::config(e),
            _ => Self::data(e),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => Self::config(e),
            _ => Self::data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::data(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::data(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::data(e)
    }
}
