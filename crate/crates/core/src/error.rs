use crate::tensor::{ScalarKind, Shape};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: String,
        expected: Shape,
        found: Shape,
    },

    #[error("scalar kind mismatch in {context}: {op} is not defined over {kind}")]
    KindMismatch {
        context: String,
        op: String,
        kind: ScalarKind,
    },

    #[error("interface mismatch composing {left} with {right}: {detail}")]
    InterfaceMismatch {
        left: String,
        right: String,
        detail: String,
    },

    #[error("label is not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("circuit contains a cycle through wire `{0}`")]
    CyclicCircuit(String),

    #[error("circuit wire `{0}` is never defined")]
    DanglingWire(String),

    #[error("circuit syntax error on line {line}: {message}")]
    CircuitSyntax { line: usize, message: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("tolerance exceeded: {0}")]
    ToleranceExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed parameter file: {0}")]
    ParamFormat(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its rendering.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError(e.to_string()))
    }
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: &Shape, found: &Shape) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.clone(),
            found: found.clone(),
        }
    }

    pub(crate) fn kind(
        context: impl Into<String>,
        op: impl Into<String>,
        kind: ScalarKind,
    ) -> Self {
        Error::KindMismatch {
            context: context.into(),
            op: op.into(),
            kind,
        }
    }

    pub(crate) fn interface(left: &str, right: &str, detail: impl Into<String>) -> Self {
        Error::InterfaceMismatch {
            left: left.to_string(),
            right: right.to_string(),
            detail: detail.into(),
        }
    }
}
