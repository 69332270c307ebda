use thiserror::Error;

/// Error type shared across the toolkit.
///
/// Variants are grouped by how a caller should react: `Data*` errors mean the
/// input files are unusable, `Schema` means an artifact was produced by an
/// incompatible tool version, and `Training`/`Solver` mean a model could not
/// be fit on the given data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("capture error: {0}")]
    Capture(String),

    #[error("malformed record: {0}")]
    Data(String),

    #[error("schema mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("one-class solver did not converge: best duality gap {gap:.3e} after {iterations} iterations")]
    SolverDiverged { gap: f64, iterations: usize },

    #[error("class \"{class}\" has {rows} rows, need at least {needed}")]
    ClassTooSmall {
        class: String,
        rows: usize,
        needed: usize,
    },

    #[error("class \"{0}\" has no rows in the supervised dataset")]
    EmptyClass(String),

    #[error("unknown statistical feature \"{given}\"; valid selectors: {}", .valid.join(", "))]
    UnknownSelector { given: String, valid: Vec<String> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by incompatible artifact versions rather than
    /// by the data itself.
    pub fn is_schema_error(&self) -> bool {
        matches!(self, Error::Schema { .. })
    }
}
