use thiserror::Error;

/// Errors surfaced by the numerical kernels and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite integrand value at node ({x}, {y}, {z})")]
    NonFiniteSample { x: f64, y: f64, z: f64 },

    #[error("inconsistency between independent evaluation paths: {0}")]
    Inconsistency(String),

    #[error("degenerate profile parameter: {0}")]
    DegenerateProfile(String),

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("search iterate reached the domain boundary: {0}")]
    Boundary(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("linear system ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("metric not positive definite at ({x}, {y}, {z})")]
    MetricDegenerate { x: f64, y: f64, z: f64 },

    #[error("degenerate surface geometry: {0}")]
    Geometry(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
