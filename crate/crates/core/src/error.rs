//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the simulation and analysis chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A physical parameter is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value failed validation; `path` is the field path.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// A binary or CSV input is malformed; `offset` is the byte offset.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// An analysis step cannot be carried out on the given data.
    #[error("analysis error: {0}")]
    Analysis(String),

    /// A scan or acquisition produced no usable signal.
    #[error("no signal: {0}")]
    NoSignal(String),

    /// An iterative fit failed to converge.
    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for a domain error.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Shorthand for a config error with a field path.
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }

    /// Shorthand for a format error at a byte offset.
    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, msg: msg.into() }
    }

    /// Shorthand for an analysis error.
    pub fn analysis(msg: impl Into<String>) -> Self {
        Error::Analysis(msg.into())
    }

    /// Shorthand for a no-usable-signal error.
    pub fn no_signal(msg: impl Into<String>) -> Self {
        Error::NoSignal(msg.into())
    }
}
