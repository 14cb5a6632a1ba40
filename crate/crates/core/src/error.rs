use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("corpus layout error: {0}")]
    CorpusLayout(String),

    #[error("split too small: {0} blocks (need at least 10)")]
    SplitTooSmall(usize),

    #[error("no split with both classes in the test set after {0} attempts")]
    ClassPresence(usize),

    #[error("offset ({dx}, {dy}) leaves no valid pixel pairs in a {rows}x{cols} matrix")]
    EmptyPairs {
        dx: isize,
        dy: isize,
        rows: usize,
        cols: usize,
    },

    #[error("value {value} is outside the {levels} quantization levels")]
    Level { value: usize, levels: usize },

    #[error("no candidate stump: every feature is excluded or constant")]
    StumpsExhausted,

    #[error("boosting failed at round {round}: weighted error {error} >= 0.5")]
    BoostingFailure { round: usize, error: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("SMO did not converge in {iterations} iterations (worst KKT violation {violation})")]
    IterationCap { iterations: usize, violation: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(&'static str),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
