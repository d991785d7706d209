use thiserror::Error;

/// Errors raised by the solver pipelines and the numeric kernel underneath.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },

    #[error("map is not completely positive (Choi eigenvalue {eigenvalue:.3e})")]
    NotCompletelyPositive { eigenvalue: f64 },

    #[error("vector is not normalized (norm {norm:.15})")]
    NotNormalized { norm: f64 },

    #[error("ODE is not semi-dissipative: B(t) has eigenvalue {eigenvalue:.6e} at t = {t}")]
    NotSemiDissipative { t: f64, eigenvalue: f64 },

    #[error("no nonzero eigenvalue; Δ undefined")]
    GapUndefined,

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("solution norm vanished; extraction ill-posed (η = {eta:.3e})")]
    VanishingNorm { eta: f64 },

    #[error("polynomial degree cap {cap} exceeded (achieved error {achieved:.3e})")]
    DegreeCap { cap: usize, achieved: f64 },

    #[error("spectrum intrudes into (0, δ): eigenvalue {eigenvalue:.6e} with δ = {delta:.6e}")]
    SpectrumInGap { eigenvalue: f64, delta: f64 },

    #[error("dilation does not preserve the marker block (residual {residual:.3e})")]
    MarkerBlock { residual: f64 },

    #[error("solution deviates from the reference by {error:.3e} (tolerance {tolerance:.1e})")]
    ReferenceMismatch { error: f64, tolerance: f64 },

    #[error("state validation failed: {0}")]
    Cptp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
