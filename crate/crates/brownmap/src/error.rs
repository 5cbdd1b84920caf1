//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building measures, solving for the
/// domain, inverting the forward map, or sampling matrices.
#[derive(Debug, Error)]
pub enum Error {
    /// A real evaluation point coincides with an atom of the measure.
    #[error("pole at atom: lambda = {0} hits an atom of the measure")]
    PoleAtAtom(f64),

    /// An integral against the measure does not stabilize under refinement.
    #[error("divergent integral at (alpha, beta, delta) = ({alpha}, {beta}, {delta})")]
    DivergentIntegral { alpha: f64, beta: f64, delta: f64 },

    /// Measure construction or loading rejected the input.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// No sign change of the limit ratio anywhere in the tracing window.
    #[error("empty boundary: no sign change of the limit ratio in the window")]
    EmptyBoundary,

    /// Newton refused to converge to a preimage with positive delta:
    /// the queried point is not in the image region.
    #[error("point {re} + {im}i is not in the image of the forward map")]
    NotInImage { re: f64, im: f64 },

    /// The 3x3 Jacobian determinant collapsed during Newton iteration.
    #[error("jacobian singular: |det| = {det:e} below threshold during inversion")]
    JacobianSingular { det: f64 },

    /// The density formula produced a value too negative to be rounding noise.
    #[error("negative density f = {f:e} at ({s}, {t}): solver or formula fault")]
    NegativeDensity { s: f64, t: f64, f: f64 },

    /// A closed-form expression that must be real came out complex,
    /// signalling evaluation outside its stated domain.
    #[error("complex result: imaginary residual {residual:e} exceeds tolerance")]
    ComplexResult { residual: f64 },

    /// The dense eigensolver failed to converge.
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    /// A comparison grid does not cover the eigenvalue cloud.
    #[error("window mismatch: grid window does not cover the cloud bounding box")]
    WindowMismatch,

    /// Invalid run configuration (windows, resolutions, rates).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
