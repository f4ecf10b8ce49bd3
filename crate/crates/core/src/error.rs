use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("subject project failure: {0}")]
    Subject(String),
    #[error("unknown test id `{0}`")]
    UnknownTest(String),
    #[error("source drift in {file}: {message}")]
    SourceDrift { file: String, message: String },
    #[error("coverage collection failed: {0}")]
    Coverage(String),
    #[error("missing prerequisite: {0}")]
    Prerequisite(String),
    #[error("reach violated: method {method} was never executed by {tests} covering test(s)")]
    ReachViolated { method: String, tests: usize },
    #[error("malformed record in {path}: {message}")]
    Record { path: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Failures caused by the subject project rather than by usage or the
    /// tool itself; the CLI maps these to a dedicated exit code.
    pub fn is_subject_failure(&self) -> bool {
        matches!(
            self,
            Error::Subject(_)
                | Error::SourceDrift { .. }
                | Error::Coverage(_)
                | Error::UnknownTest(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
