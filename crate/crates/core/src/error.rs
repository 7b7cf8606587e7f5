use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{field}: {msg}")]
    Config { field: String, msg: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("training diverged: {0}")]
    Training(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad file format: {0}")]
    Format(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("missing run: {0}")]
    MissingRun(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Input(_) => "input",
            Error::Numerical(_) => "numerical",
            Error::Protocol(_) => "protocol",
            Error::Training(_) => "training",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Contract(_) => "contract",
            Error::MissingRun(_) => "missing_run",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!(
            "{what}: expected dimension {expected}, got {got}"
        )));
    }
    Ok(())
}
