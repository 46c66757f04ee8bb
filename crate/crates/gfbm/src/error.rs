//! Crate-wide error type.

use crate::quad::QuadError;

/// Errors produced by the gfbm library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum GfbmError {
    /// Parameter pair outside the admissible domain.
    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },

    /// Malformed time grid (non-increasing, non-finite, empty, ...).
    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    /// Quadrature failure, forwarded from the integration engine.
    #[error("quadrature error: {0}")]
    Quadrature(#[from] QuadError),

    /// Operation requires alpha < 1/2.
    #[error("operation requires alpha < 1/2 (got alpha = {alpha})")]
    NotLilRegime { alpha: f64 },

    /// The limit-in-h extrapolation ladder did not settle.
    #[error("extrapolation unstable: successive estimates {previous} and {latest} differ by more than {tolerance:.0}%")]
    ExtrapolationUnstable {
        previous: f64,
        latest: f64,
        tolerance: f64,
    },

    /// Covariance matrix could not be factored even at the jitter cap.
    #[error("matrix not factorizable: jitter escalated to {jitter_reached} (cap {cap})")]
    NotFactorizable { jitter_reached: f64, cap: f64 },

    /// ln ln(1/|h|) is undefined or non-positive for this scale.
    #[error("normalizer undefined: |h| = {h_abs} must be below e^-e ~ 0.0659880")]
    NormalizerUndefined { h_abs: f64 },

    /// Increment query outside its admissible domain.
    #[error("invalid increment query: {reason}")]
    InvalidIncrementQuery { reason: String },

    /// Covariance of the limit process is singular beyond the jitter policy.
    #[error("singular covariance in rate functional")]
    SingularCovariance,

    /// Grids of two objects that must share a grid do not match.
    #[error("grid mismatch: {reason}")]
    GridMismatch { reason: String },

    /// r_U came out non-positive where a log-linear fit was requested.
    #[error("non-positive covariance values in decay fit ({count} of {total} points)")]
    NonPositiveValues { count: usize, total: usize },

    /// Query point outside the tabulated spectral range.
    #[error("frequency {u} outside tabulated range [0, {lambda_max}]")]
    OutOfRange { u: f64, lambda_max: f64 },

    /// Band cutoff beyond the representable spectral range.
    #[error("band cutoff {d_hi} exceeds tabulated spectral range {lambda_max}")]
    BandOutOfTable { d_hi: f64, lambda_max: f64 },

    /// Functional needs a finer grid than provided.
    #[error("grid too coarse: delta = {delta} but grid spacing is {spacing}")]
    GridTooCoarse { delta: f64, spacing: f64 },

    /// A cluster-check target lies outside the Strassen ball.
    #[error("target {index} outside the Strassen ball (rate = {rate})")]
    TargetOutsideBall { index: usize, rate: f64 },

    /// Tail thresholds beyond the empirically estimable range.
    #[error("insufficient tail samples at threshold {threshold} ({count} hits, need >= {required})")]
    InsufficientTailSamples {
        threshold: f64,
        count: usize,
        required: usize,
    },

    /// Limsup summary requested from a ladder that is too short.
    #[error("report covers {scales} scales, need at least {required}")]
    TooFewScales { scales: usize, required: usize },

    /// Serialization / deserialization problem.
    #[error("serialization error: {reason}")]
    Serialization { reason: String },
}

pub type Result<T> = std::result::Result<T, GfbmError>;
