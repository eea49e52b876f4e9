use crate::ode::OdeError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("angular quantum number k must be nonzero")]
    ZeroK,
    #[error("a potential derivative is required when mu_a != 0")]
    MissingDerivative,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tabulated potential: {0}")]
    Table(String),
    #[error("lambda = {lambda} lies outside the open gap ({lo}, {hi})")]
    OutsideGap { lambda: f64, lo: f64, hi: f64 },
    #[error("family is inadmissible at zero: {0}")]
    Inadmissible(String),
    #[error("boundary angle at zero is degenerate: theta0 = {theta0}")]
    DegenerateAngle { theta0: f64 },
    #[error("no truncation window: {0}")]
    NoWindow(String),
    #[error("grid too coarse: {per_decade:.2} points per decade, at least 16 required")]
    GridTooCoarse { per_decade: f64 },
    #[error("integration failed at x = {x}: {source}")]
    Integration { x: f64, source: OdeError },
    #[error("bracket [{lo}, {hi}] does not enclose a root: g = {g_lo} and {g_hi}")]
    BracketInvalid { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("root search stopped after {iterations} iterations with |g| = {residual}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("nu* decreases by {drop} between lambda = {lo} and {hi}")]
    Monotonicity { lo: f64, hi: f64, drop: f64 },
    #[error("angles at the matching point differ by {mismatch} modulo pi")]
    AngleMismatch { mismatch: f64 },
    #[error("amplitude overflow at x = {x}")]
    Overflow { x: f64 },
    #[error("Newton corrector did not converge: residual {residual} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian, condition estimate {condition}")]
    SingularJacobian { condition: f64 },
    #[error("coupling rejected: {0}")]
    CouplingRejected(String),
    #[error("solution vanishes at x = {x}")]
    VanishingSolution { x: f64 },
    #[error("seed residual {residual} exceeds {limit}")]
    SeedResidual { residual: f64, limit: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
