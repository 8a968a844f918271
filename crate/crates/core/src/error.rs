use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no sequences")]
    NoSequences,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("hop {hop} out of range 1..={max_hop}")]
    HopOutOfRange { hop: usize, max_hop: usize },

    #[error("untokenized item: {}", .0.join(", "))]
    UntokenizedItem(Vec<String>),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("misaligned inputs: {what} ({left} vs {right})")]
    Misaligned {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("MSP requires probability scores")]
    NotProbability,

    #[error("user mismatch: {0} vs {1}")]
    UserMismatch(u32, u32),

    #[error("infeasible plant spec: {0}")]
    Infeasible(String),

    #[error("index file: {0}")]
    IndexFormat(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 3 for I/O failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::File { .. } => 3,
            _ => 2,
        }
    }
}
