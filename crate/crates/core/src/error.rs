use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value is not dyadic: {0}")]
    NonDyadic(String),

    #[error("invalid rectangle: {0}")]
    InvalidRect(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("knot {z} is outside the open support span")]
    KnotOutsideSupport { z: String },

    #[error("split does not traverse any B-spline of the space")]
    NoTraversal,

    #[error("mesh is not an open tensor mesh: {0}")]
    NotOpenTensor(String),

    #[error("function is not part of the space: {0}")]
    UnknownFunction(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("marker selected no function in iteration {iteration}")]
    EmptyMarking { iteration: usize },

    #[error("element {element} carries {count} B-splines, expected {expected}")]
    Overloaded {
        element: String,
        count: usize,
        expected: usize,
    },

    #[error("nestedness removal exceeded {cap} expansions in iteration {iteration}")]
    ExpansionCap { iteration: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical routine rather than of input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::ExpansionCap { .. } | Error::Overloaded { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("line {} column {}: {}", e.line(), e.column(), e))
    }
}
