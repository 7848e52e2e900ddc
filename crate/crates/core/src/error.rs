use thiserror::Error;

/// Every failure a computation in this crate can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("transition matrix is not aperiodic: no power up to k^2 = {0} is strictly positive")]
    NotAperiodic(usize),
    #[error("transition matrix has an empty {kind} at index {index}")]
    EmptyRowOrColumn { kind: &'static str, index: usize },
    #[error("matrix must be {k}x{k} over {{0,1}}: {reason}")]
    BadMatrix { k: usize, reason: String },
    #[error("branch images of successors {a} and {b} of symbol {symbol} overlap")]
    RealizationOverlap { symbol: usize, a: usize, b: usize },
    #[error("invalid branch for symbol {symbol}: {reason}")]
    InvalidBranch { symbol: usize, reason: String },
    #[error("word {0:?} is not admissible")]
    NotAdmissible(Vec<u8>),
    #[error("operation requires a geometric realization")]
    NoRealization,
    #[error("depth mismatch: expected {expected}, got {got}")]
    DepthMismatch { expected: usize, got: usize },
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("eigenvector has a non-positive entry at index {0}")]
    NonPositiveEigenvector(usize),
    #[error("could not bracket the pressure root: {0}")]
    BracketFailure(String),
    #[error("no admissible pair of inverse branches of length {0}")]
    NoAdmissiblePair(usize),
    #[error("roof is degenerate: temporal increment estimate {0:e} vanishes")]
    DegenerateRoof(f64),
    #[error("diameter cap {cap:e} is below the deepest enumerable cylinder (depth limit {depth_limit})")]
    CapTooSmall { cap: f64, depth_limit: usize },
    #[error("supports of damping indicators overlap: {0}")]
    OverlappingSupports(String),
    #[error("index set is not dense: block {block} ({word:?}) has no damped subblock")]
    DensenessFailure { block: usize, word: Vec<u8> },
    #[error("logarithmic integral undefined for x = {0} (need x > 2)")]
    DomainError(f64),
    #[error("sample too short: t_max = {t_max} exceeds 1% of total flow time {total}")]
    InsufficientSample { t_max: f64, total: f64 },
    #[error("correlation is below the noise floor on the fit window")]
    BelowNoiseFloor,
    #[error("expression error in `{expr}`: {reason}")]
    Expression { expr: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Name of the failure case, e.g. `DegenerateRoof`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotAperiodic(_) => "NotAperiodic",
            Error::EmptyRowOrColumn { .. } => "EmptyRowOrColumn",
            Error::BadMatrix { .. } => "BadMatrix",
            Error::RealizationOverlap { .. } => "RealizationOverlap",
            Error::InvalidBranch { .. } => "InvalidBranch",
            Error::NotAdmissible(_) => "NotAdmissible",
            Error::NoRealization => "NoRealization",
            Error::DepthMismatch { .. } => "DepthMismatch",
            Error::NoConvergence(_) => "NoConvergence",
            Error::NonPositiveEigenvector(_) => "NonPositiveEigenvector",
            Error::BracketFailure(_) => "BracketFailure",
            Error::NoAdmissiblePair(_) => "NoAdmissiblePair",
            Error::DegenerateRoof(_) => "DegenerateRoof",
            Error::CapTooSmall { .. } => "CapTooSmall",
            Error::OverlappingSupports(_) => "OverlappingSupports",
            Error::DensenessFailure { .. } => "DensenessFailure",
            Error::DomainError(_) => "DomainError",
            Error::InsufficientSample { .. } => "InsufficientSample",
            Error::BelowNoiseFloor => "BelowNoiseFloor",
            Error::Expression { .. } => "Expression",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
