use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every structured failure the engine can report.
///
/// Analysis errors are values, never panics: the CLI serialises them and
/// grouped analyses collect them per group.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("factor `{factor}` has {found} level(s); at least 2 are required")]
    InsufficientLevels { factor: String, found: usize },

    #[error("unbalanced design: cell {cell} has {found} observation(s), expected {expected}")]
    UnbalancedDesign {
        cell: String,
        expected: usize,
        found: usize,
    },

    #[error("response column `{column}` is not numeric (row {row}: `{value}`)")]
    NonNumericResponse {
        column: String,
        row: usize,
        value: String,
    },

    #[error("model is saturated: no residual degrees of freedom remain")]
    SaturatedModel,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("table has no data rows")]
    EmptyTable,

    #[error("missing cell at row {row}, column `{column}`")]
    MissingCell { row: usize, column: String },

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("degenerate shrinkage: total variance of the target is zero")]
    DegenerateShrinkage,

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("environment index is constant across environments")]
    ConstantEnvironmentIndex,

    #[error("sample too small: {found} value(s), at least {required} required")]
    SampleTooSmall { required: usize, found: usize },

    #[error("sample too large: {found} values, at most {limit} supported")]
    SampleTooLarge { limit: usize, found: usize },

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("insufficient groups: {0}")]
    InsufficientGroups(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "SchemaError",
            Error::Constraint(_) => "ConstraintError",
            Error::MissingColumn(_) => "MissingColumn",
            Error::InsufficientLevels { .. } => "InsufficientLevels",
            Error::UnbalancedDesign { .. } => "UnbalancedDesign",
            Error::NonNumericResponse { .. } => "NonNumericResponse",
            Error::SaturatedModel => "SaturatedModel",
            Error::Parse { .. } => "ParseError",
            Error::EmptyTable => "EmptyTable",
            Error::MissingCell { .. } => "MissingCell",
            Error::UnknownDataset(_) => "UnknownDataset",
            Error::Domain(_) => "DomainError",
            Error::Convergence(_) => "ConvergenceError",
            Error::NotApplicable(_) => "NotApplicable",
            Error::DegenerateShrinkage => "DegenerateShrinkage",
            Error::DegenerateMatrix(_) => "DegenerateMatrix",
            Error::ConstantEnvironmentIndex => "ConstantEnvironmentIndex",
            Error::SampleTooSmall { .. } => "SampleTooSmall",
            Error::SampleTooLarge { .. } => "SampleTooLarge",
            Error::ZeroVariance => "ZeroVariance",
            Error::InsufficientGroups(_) => "InsufficientGroups",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
