use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record in an input file could not be decoded.
    #[error("line {line}: field `{field}`: {message}")]
    Record {
        line: usize,
        field: String,
        message: String,
    },
    /// Input was well formed but violates an operation's contract.
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    /// A pipeline stage aborted.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub(crate) fn record(line: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Record {
            line,
            field: field.to_owned(),
            message: message.into(),
        }
    }

    /// True when the error was caused by bad input data rather than the
    /// environment (I/O) or a bug.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Record { .. } | Error::Invalid(_) | Error::Json(_) => true,
            Error::Io(_) => false,
            Error::Stage { source, .. } => source.is_data_error(),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
