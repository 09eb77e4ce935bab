use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid size {grid} is smaller than mode count {modes}")]
    GridTooSmall { grid: usize, modes: usize },
    #[error("state diverged at step {step} (|coeff| > {threshold:e})")]
    Diverged { step: usize, threshold: f64 },
    #[error("drift overflow: b({value}) is not finite")]
    DriftOverflow { value: f64 },
    #[error(
        "newton solve did not converge after {iterations} iterations (offending value {value})"
    )]
    NewtonFailed { iterations: usize, value: f64 },
    #[error("yosida parameter delta = {delta} outside (0, {upper})")]
    DeltaOutOfRange { delta: f64, upper: f64 },
    #[error("smoothing fit failed: {0}")]
    SmoothingFit(String),
    #[error("unsupported test function for {op}: {kind}")]
    Unsupported { op: &'static str, kind: String },
    #[error("{fraction:.4} of trajectories diverged (limit 0.01)")]
    TooManyDiverged { fraction: f64 },
    #[error("stationarity diagnostic failed: {0}")]
    NonStationary(String),
    #[error("gradient not available for {0}")]
    GradientUnavailable(String),
    #[error("nested Monte Carlo budget exceeded: {requested} > {limit}")]
    BudgetExceeded { requested: usize, limit: usize },
    #[error("scenario violates dissipativity: zeta = {zeta} must be negative")]
    NotDissipative { zeta: f64 },
}

pub type Result<T> = std::result::Result<T, SimError>;
