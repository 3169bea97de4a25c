use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(qcrb::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected bound violation: {0}")]
    Violation(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Violation(_) => 4,
        }
    }
}

/// Attributes a library error to a manifest field when it stems from the
/// input; everything else is a numerical failure.
pub fn at(path: &'static str) -> impl Fn(qcrb::Error) -> CliError {
    move |e| {
        use qcrb::Error::*;
        match e {
            Config(_) | Target(_) | Domain(_) | Boundary { .. } | InvalidPovm(_) | InvalidProjector(_)
            | Capacity { .. } | Shape(_) | NotHermitian { .. } | RankDeficientDesign { .. } => CliError::config(path, e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<qcrb::Error> for CliError {
    fn from(e: qcrb::Error) -> Self {
        CliError::Numerical(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
