use std::fmt;

/// Failures reported by the front end, each with a fixed exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("data error in {file}: {source}")]
    Data { file: String, source: DataError },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("cannot write {file}: {message}")]
    Output { file: String, message: String },

    #[error("{failed} check(s) failed")]
    ChecksFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Output { .. } => 1,
            CliError::Data { .. } => 2,
            CliError::Numeric(_) | CliError::ChecksFailed { .. } => 3,
        }
    }

    pub fn data(file: impl fmt::Display, source: DataError) -> Self {
        CliError::Data {
            file: file.to_string(),
            source,
        }
    }
}

impl From<paralens::Error> for CliError {
    fn from(e: paralens::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("bad magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("file truncated: needs {expected} bytes, has {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("label {label} at item {index} is outside 0..10")]
    BadLabel { index: usize, label: u8 },

    #[error("csv: {0}")]
    Csv(String),

    #[error("{0}")]
    Io(String),
}
