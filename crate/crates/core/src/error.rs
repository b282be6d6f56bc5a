use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Studies disagree on which characteristics they report, or a study
    /// references something undeclared.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input text could not be parsed. `line` is 1-based when known.
    #[error("format error{}: {message}", location(*.line, *.column))]
    Format {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("criterion unavailable: {criterion} needs {field} for studies {}", .missing.join(", "))]
    CriterionUnavailable {
        criterion: String,
        field: String,
        missing: Vec<String>,
    },

    #[error("time budget of {seconds:.1}s exceeded during {stage}")]
    TimeBudgetExceeded { stage: String, seconds: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("need at least {needed} studies, got {got}")]
    TooFewStudies { needed: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl Error {
    pub fn format(message: impl Into<String>) -> Self {
        Error::Format {
            message: message.into(),
            line: None,
            column: None,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by user input rather than by the tool or the
    /// environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Format { .. }
                | Error::Partition(_)
                | Error::CriterionUnavailable { .. }
                | Error::Config(_)
                | Error::TooFewStudies { .. }
                | Error::Capacity(_)
        )
    }
}
