use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("malformed input: {0}")]
    Schema(String),

    #[error("operator is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPositive { eigenvalue: f64 },

    #[error("operator is not a projector (residual {residual:e})")]
    NotProjector { residual: f64 },

    #[error("operator is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("normalization violated: d(1,1) = {value}")]
    Normalization { value: f64 },

    #[error("basis is not trace-orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("invalid temporal support: {0}")]
    InvalidSupport(String),

    #[error("temporal supports differ")]
    SupportMismatch,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("histories {first} and {second} are not disjoint")]
    NotDisjoint { first: usize, second: usize },

    #[error("operator norm {norm} exceeds limit {limit}")]
    NormTooLarge { norm: f64, limit: f64 },

    #[error("dimension {dim} below required minimum {min}")]
    DimensionTooSmall { dim: usize, min: usize },

    #[error("decoherence functional is indefinite")]
    Indefinite,

    #[error("decoherence functional is degenerate (nullspace dimension {nullity})")]
    Degenerate { nullity: usize },

    #[error("null seed operator at index {index} (d(B,B) = {value:e})")]
    NullSeed { index: usize, value: f64 },

    #[error("operators are linearly dependent")]
    LinearlyDependent,

    #[error("{count} histories exceed the maximum {max} allowed in a consistent set")]
    TooManyHistories { count: usize, max: usize },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("more than one zero-probability history; coarse grain them into one first")]
    ZeroProbabilityNotMerged,

    #[error("operators {first} and {second} are not d-orthogonal (|d| = {value:e})")]
    NotOrthogonal {
        first: usize,
        second: usize,
        value: f64,
    },

    #[error("operators do not span the history space ({rank} of {dim})")]
    NotSpanning { rank: usize, dim: usize },

    #[error("consistency parameter sigma = {sigma} exceeds 1/4")]
    OutsideConsistencySphere { sigma: f64 },

    #[error("extension has matrix elements inside the fitted span (residual {residual:e})")]
    ExtensionLeaks { residual: f64 },

    #[error("eigenbasis does not factor into product bases (residual {residual:e})")]
    BasisDoesNotFactor { residual: f64 },

    #[error("weights do not factor (cross-ratio residual {residual:e})")]
    WeightsDoNotFactor { residual: f64 },

    #[error(
        "recovered boundary conditions do not reproduce the functional (residual {residual:e})"
    )]
    ReconstructionMismatch { residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or mis-shaped input rather than a
    /// violated mathematical precondition.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NotSquare { .. }
                | Error::NonFinite
                | Error::Schema(_)
                | Error::InvalidSupport(_)
                | Error::SupportMismatch
                | Error::InvalidPartition(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    /// Short machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSquare { .. } => "not_square",
            Error::NonFinite => "non_finite",
            Error::Schema(_) => "schema",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NotPositive { .. } => "not_positive",
            Error::NotProjector { .. } => "not_projector",
            Error::NotUnitary { .. } => "not_unitary",
            Error::Normalization { .. } => "normalization",
            Error::NotOrthonormal { .. } => "not_orthonormal",
            Error::InvalidSupport(_) => "invalid_support",
            Error::SupportMismatch => "support_mismatch",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::NotDisjoint { .. } => "not_disjoint",
            Error::NormTooLarge { .. } => "norm_too_large",
            Error::DimensionTooSmall { .. } => "dimension_too_small",
            Error::Indefinite => "indefinite",
            Error::Degenerate { .. } => "degenerate",
            Error::NullSeed { .. } => "null_seed",
            Error::LinearlyDependent => "linearly_dependent",
            Error::TooManyHistories { .. } => "too_many_histories",
            Error::NegativeProbability { .. } => "negative_probability",
            Error::ZeroProbabilityNotMerged => "zero_probability_not_merged",
            Error::NotOrthogonal { .. } => "not_orthogonal",
            Error::NotSpanning { .. } => "not_spanning",
            Error::OutsideConsistencySphere { .. } => "outside_consistency_sphere",
            Error::ExtensionLeaks { .. } => "extension_leaks",
            Error::BasisDoesNotFactor { .. } => "basis_does_not_factor",
            Error::WeightsDoNotFactor { .. } => "weights_do_not_factor",
            Error::ReconstructionMismatch { .. } => "reconstruction_mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
