use thiserror::Error;

/// Errors raised by the simulation core.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type the
/// computation ran in, so the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("squeezing parameter must be finite and >= 0, got {0}")]
    NegativeSqueezing(f64),

    #[error("transmissivity must lie in [0, 1], got {0}")]
    TransmissivityOutOfRange(f64),

    #[error("gain must be finite and > 0, got {0}")]
    NonPositiveGain(f64),

    #[error("kernel variance must be > 0, got {0}")]
    NonPositiveKernel(f64),

    #[error("loss kernel is undefined at transmissivity {0} (requires 0 < T < 1; T = 1 is the identity)")]
    KernelUndefined(f64),

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("state violates the uncertainty bound: smallest symplectic eigenvalue {0} < 1/4")]
    UncertaintyViolation(f64),

    #[error("singular conditioning block in homodyne measurement")]
    SingularConditioning,

    #[error("gamma = {gamma} is below 1: teleported coefficients would alternate in sign")]
    GammaBelowOne { gamma: f64 },

    #[error("channel with gamma = {gamma}, gain = {gain} violates the amplifier noise bound")]
    UnphysicalChannel { gamma: f64, gain: f64 },

    #[error("tolerance must be finite and > 0, got {0}")]
    InvalidTolerance(f64),

    #[error("Fock cutoff would exceed {max} to reach tail mass {tolerance:e} (q = {ratio})")]
    CutoffExceeded {
        max: usize,
        tolerance: f64,
        ratio: f64,
    },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("partial transpose mode must be 1 or 2, got {0}")]
    InvalidMode(usize),

    #[error("invalid search bracket [{0}, {1}]")]
    InvalidBracket(f64, f64),

    #[error("coherent-state expansion at |amplitude| = {amplitude} loses {deficit:e} of its norm at Fock dimension {dim}; increase the Fock dimension")]
    FockTruncation {
        amplitude: f64,
        deficit: f64,
        dim: usize,
    },

    #[error("bit error must lie in [0, 0.5], got {0}")]
    InvalidBitError(f64),

    #[error("invalid sweep configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
