use std::path::PathBuf;

/// Every failure the toolkit can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("insufficient length: need {needed} samples, have {available}")]
    InsufficientLength { needed: usize, available: usize },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("batch norm evaluated before any training batch")]
    UninitializedStatistics,

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file: {0}")]
    Corruption(String),

    #[error("missing electrode {0}")]
    Electrode(String),

    #[error("recording too short: {0}")]
    TooShort(String),

    #[error("invalid architecture: {0}")]
    Config(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged in epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("time budget of {0:.1} s exceeded")]
    Timeout(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty corpus: {0}")]
    EmptyCorpus(&'static str),

    #[error("band {name} [{lo}, {hi}) Hz lies above the Nyquist frequency {nyquist} Hz")]
    Band { name: String, lo: f64, hi: f64, nyquist: f64 },

    #[error("search finished without a successful trial")]
    NoIncumbent,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
