use thiserror::Error;

/// Errors raised by the metric, state, solver and immersion layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("ODE solution left the representable range at y = {y}")]
    Blowup { y: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("delta = {delta} outside the admissible interval (0, {upper})")]
    DeltaOutOfRange { delta: f64, upper: f64 },

    #[error("corner root check failed: residual {residual:e}")]
    CornerInconsistency { residual: f64 },

    #[error("positivity lost: v <= floor at y = {y}, index {index}")]
    PositivityLoss { y: f64, index: usize },

    #[error("CFL violation: dy = {dy:e} exceeds limit {limit:e}")]
    CflViolation { dy: f64, limit: f64 },

    #[error("test function support leaves the domain: {0}")]
    Support(String),

    #[error("seed frame inconsistent with the metric: defect {defect:e}")]
    SeedInconsistent { defect: f64 },

    #[error("metric degenerate (EG - F^2 <= 0) at y = {y}")]
    MetricDegenerate { y: f64 },

    #[error("mesh has no vertices")]
    EmptyMesh,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
