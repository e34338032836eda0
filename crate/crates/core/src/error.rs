use thiserror::Error;

/// Errors shared by every solver layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state or derivative became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("required step size fell below 1e-14*max(1,|t|) at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("sample time {t} outside trajectory span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },
    #[error("root is not bracketed (non-convex or corrupt curve?)")]
    RootNotBracketed,
    #[error("adaptive quadrature failed to reach the requested tolerance")]
    QuadratureFailure,
    #[error("all deviations below noise floor; forcing never engaged")]
    DegenerateFit,
    #[error("segment endpoints classify to the same exit side")]
    EndpointsSameSide,
    #[error("bisection bracket stopped making progress (event detection failure?)")]
    NoBracketProgress,
    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("finite-difference Jacobian is numerically singular (cond {cond:e})")]
    SingularJacobian { cond: f64 },
    #[error("forcing periods are incommensurate (ratio {ratio})")]
    IncommensuratePeriods { ratio: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
