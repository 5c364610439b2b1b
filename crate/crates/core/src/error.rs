use crate::measure_space::CellId;

/// Errors raised by the library. Every variant names the violated precondition.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown cell `{0}`")]
    UnknownCell(CellId),

    #[error("cell `{0}` is an atom and cannot be split")]
    AtomNotSplittable(CellId),

    #[error("split fraction {0} must lie strictly inside (0, 1)")]
    FractionOutOfRange(f64),

    #[error("cell measure must be finite and > 0, got {measure} for `{id}`")]
    InvalidMeasure { id: CellId, measure: f64 },

    #[error("bound must be finite and > 0, got {0}")]
    InvalidBound(f64),

    #[error("duplicate cell id `{0}`")]
    DuplicateCellId(CellId),

    #[error("invalid cell id `{0}`: root ids must be non-empty and must not contain '#'")]
    InvalidCellId(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kept measure {kept} for cell `{id}` lies outside [0, {measure}]")]
    KeptMeasureOutOfRange { id: CellId, kept: f64, measure: f64 },

    #[error("weight {value} lies outside [0, 1]{}", .id.as_ref().map(|i| format!(" on cell `{i}`")).unwrap_or_default())]
    WeightOutOfRange { id: Option<CellId>, value: f64 },

    #[error("matrix is not Hermitian: relative asymmetry {violation:e} exceeds {tolerance:e}")]
    NonHermitianInput { violation: f64, tolerance: f64 },

    #[error("matrix entries must be finite")]
    NonFiniteEntry,

    #[error("epsilon must be > 0, got {0}")]
    EpsilonNonpositive(f64),

    #[error("variation {variation:e} on cell `{id}` stays above tolerance {tolerance:e} after {depth} refinements")]
    VariationUnboundedOnCell { id: CellId, variation: f64, tolerance: f64, depth: usize },

    #[error("refinement would exceed the cell budget of {max_cells} cells")]
    RefinementBudgetExceeded { max_cells: usize },

    #[error("tau0 must lie strictly inside (0, 1), got {0}")]
    TauOutOfOpenInterval(f64),

    #[error("total measure must be finite, got {0}")]
    InfiniteTotalMeasure(f64),

    #[error("exhaustive search supports at most {max} cells, got {found}")]
    TooManyCells { found: usize, max: usize },

    #[error("exhaustive search supports at most {max} vectors, got {found}")]
    TooManyVectors { found: usize, max: usize },

    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    #[error("unknown strategy `{0}` (expected greedy, local_search or randomized_rounding)")]
    UnknownStrategy(String),

    #[error("resolution {0} is not a power of two")]
    ResolutionNotPowerOfTwo(usize),

    #[error("dimension {d} needs resolution >= {}, got {resolution}", 2 * .d)]
    DimensionTooLargeForResolution { d: usize, resolution: usize },

    #[error("operator is not positive semidefinite on cell `{id}` (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { id: CellId, min_eigenvalue: f64 },

    #[error("weight cannot be used here: {0}")]
    UnsupportedWeight(String),

    #[error("guarantee violated: {what} = {value:e} exceeds bound {bound:e}")]
    GuaranteeViolated { what: String, value: f64, bound: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
