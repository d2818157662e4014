use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CrpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CrpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("degenerate direction: q'Dq = {0:e} is not positive")]
    DegenerateDirection(f64),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("class {class} has {available} samples, {requested} requested")]
    InsufficientSamples {
        class: usize,
        available: usize,
        requested: usize,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<CrpError>,
    },
}

/// Broad failure category, used by the experiment runner to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl CrpError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CrpError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        CrpError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CrpError::Config(_) => ErrorKind::Config,
            CrpError::Singular(_)
            | CrpError::DegenerateDirection(_)
            | CrpError::IllPosed(_)
            | CrpError::NumericalFailure(_)
            | CrpError::Precondition(_) => ErrorKind::Numerical,
            CrpError::Dimension(_)
            | CrpError::EmptyDataset
            | CrpError::EmptyClass(_)
            | CrpError::TooFewClasses(_)
            | CrpError::InsufficientSamples { .. }
            | CrpError::Parse { .. }
            | CrpError::Io { .. } => ErrorKind::Data,
            CrpError::Trial { source, .. } => source.kind(),
        }
    }

    /// Process exit status: 2 for configuration, 3 for data, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}
