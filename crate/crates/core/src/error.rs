use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge: estimated error {estimated:.3e} exceeds tolerance {requested:.3e}")]
    QuadratureDidNotConverge { estimated: f64, requested: f64 },

    #[error("point is not in the interior of the domain")]
    PointNotInterior,

    #[error("point is not in the exterior of the closed ball")]
    PointNotExterior,

    #[error("points coincide")]
    CoincidentPoints,

    #[error("radius {radius} is not below the admissible limit {limit}")]
    RadiusTooLarge { radius: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("walk-on-spheres exceeded {0} iterations")]
    StepLimitExceeded(usize),

    #[error("all simulated paths were censored")]
    AllPathsCensored,

    #[error("separation M = {m} exceeds the admissible cap {cap}")]
    CapViolated { m: f64, cap: f64 },

    #[error("point is not on the domain boundary (distance {0:.3e})")]
    NoBoundaryPoint(f64),

    #[error("only {hits} positive paths, at least {needed} required")]
    InsufficientHits { hits: u64, needed: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
