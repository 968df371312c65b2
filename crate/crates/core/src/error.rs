use thiserror::Error;

/// Errors produced by the library.
///
/// Numeric payloads are carried as `f64` regardless of the working precision
/// so that the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-Hermitian: max |J* + J| = {defect:e}")]
    RejectsNonSkew { defect: f64 },

    #[error("J is the zero matrix")]
    RejectsZero,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("basis is not an admissible splitting of J: {0}")]
    InadmissibleBasis(String),

    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("layer thicknesses sum to {sum}, expected period {period}")]
    PeriodMismatch { sum: f64, period: f64 },

    #[error("unsupported function class: {0}")]
    UnsupportedFunctionClass(String),

    #[error("invalid hypothesis mode: {0}")]
    InvalidMode(String),

    #[error("real shift z0 = {0} rejected: self-adjointness is certified only at a non-real shift")]
    RealShiftRejected(f64),

    #[error("block {which} is singular (smallest singular value {sigma_min:e}, scale {scale:e})")]
    SingularBlock {
        which: &'static str,
        sigma_min: f64,
        scale: f64,
    },

    #[error("(H - lambda W)_22 is singular on layer {layer} at lambda = {re}{im:+}i (smallest singular value {sigma_min:e})")]
    SingularA22 {
        layer: usize,
        re: f64,
        im: f64,
        sigma_min: f64,
    },

    #[error("sample grid is not aligned with the trajectory: {0}")]
    GridMisaligned(String),

    #[error("generator has non-finite entries")]
    NonFiniteGenerator,

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("initial value is not in ran J: |(I - P) f0| = {residual:e}, |f0| = {norm:e}")]
    InitialNotInRange { residual: f64, norm: f64 },

    #[error("unsupported source: {0}")]
    UnsupportedSource(String),

    #[error("oracle step size underflow after {halvings} halvings")]
    StepUnderflow { halvings: usize },

    #[error("eigensolver did not converge")]
    EigensolverFailure,

    #[error("invalid range: {0}")]
    RangeInvalid(String),

    #[error("invalid material tensor: {0}")]
    InvalidTensor(String),

    #[error("W is not positive definite on layer {layer}: {reason}")]
    DegenerateW { layer: usize, reason: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
