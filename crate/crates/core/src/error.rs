use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum SucrError {
    /// A numerical routine received an argument outside its domain.
    #[error("domain error in {function}: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    /// An input vector or parameter set that cannot be processed (e.g. a zero
    /// channel estimate fed to the precoder).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The estimator could not produce an estimate.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Invalid experiment or system configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// I/O failure with the offending path attached.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl SucrError {
    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        SucrError::Domain {
            function,
            detail: detail.into(),
        }
    }

    /// True for errors caused by user-supplied configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(self, SucrError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, SucrError>;
