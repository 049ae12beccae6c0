use thiserror::Error;

/// Errors surfaced by the numerical modules.
///
/// Each variant carries enough context to tell which stage failed; the CLI
/// prefixes the module name when reporting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("mode at |xi| = {radius} is unstable: |G| exceeded {limit:e}")]
    UnstableMode { radius: f64, limit: f64 },

    #[error("fixed point diverged after {iterations} iterations (last increment {increment:e})")]
    Divergence { iterations: usize, increment: f64 },

    #[error("straightening map not invertible: |grad_v Phi| = {gradient} >= 1/2")]
    Invertibility { gradient: f64 },

    #[error("ledger entry {value:e} exceeds the instability limit")]
    Instability { value: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("unsupported dimension {0}")]
    Dimension(usize),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
