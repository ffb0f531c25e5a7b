use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("argument outside the special-function envelope: {0}")]
    Envelope(String),
    #[error("basis is rank deficient (condition estimate {condition:.3e})")]
    RankCollapse { condition: f64 },
    #[error("no eigenvalue dip below {sigma_tol:e} in [{lo:.6}, {hi:.6}]; scan trace: {trace}")]
    NoDip {
        sigma_tol: f64,
        lo: f64,
        hi: f64,
        trace: String,
    },
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("point ({x:.6}, {y:.6}) lies outside the triangle")]
    OutsideDomain { x: f64, y: f64 },
    #[error("Hessian unavailable within the vertex exclusion radius")]
    HessianUnavailable,
    #[error(
        "Bessel factor {factor:e} too small at probe radius {radius:e}; increase the probe radius"
    )]
    BesselFactorTooSmall { factor: f64, radius: f64 },
    #[error("eigenpair does not match its geometry: {0}")]
    StaleBasis(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
