use std::fmt;

/// Library-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A constructor or operation received a parameter outside its domain.
    InvalidParameter(String),
    /// The evaluation point is outside the tubular neighborhood where the
    /// signed distance is smooth.
    OutOfNeighborhood { d: f64, rho: f64 },
    /// The requested quantity is not defined for this s regime
    /// (e.g. kappa for s >= 1/2, c1 for s <= 1/2).
    InvalidRegime(String),
    /// Iterative solver failed to reach the tolerance.
    NonConvergence { iterations: usize, residual: f64 },
    /// The solved profile lost monotonicity, which signals a grid too
    /// coarse for this s.
    NonMonotone { at: f64 },
    /// Two supposedly-equivalent forms of a constant disagree beyond
    /// tolerance; indicates a quadrature failure.
    CrossFormDisagreement { a: f64, b: f64, tol: f64 },
    /// Grid cannot resolve the requested front width.
    UnderResolved(String),
    /// The explicit time stepper left the admissible range.
    Unstable { t: f64, value: f64 },
    /// Front extraction found no level crossing.
    NoFront,
    Io(std::io::Error),
    Json(serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::OutOfNeighborhood { d, rho } => {
                write!(f, "point outside tubular neighborhood: |d| = {} >= {}", d.abs(), rho)
            }
            Error::InvalidRegime(msg) => write!(f, "invalid regime: {msg}"),
            Error::NonConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations, residual {residual:.3e}")
            }
            Error::NonMonotone { at } => {
                write!(f, "profile not monotone near xi = {at}; grid too coarse")
            }
            Error::CrossFormDisagreement { a, b, tol } => {
                write!(f, "cross-form disagreement: {a} vs {b} (tolerance {tol})")
            }
            Error::UnderResolved(msg) => write!(f, "under-resolved: {msg}"),
            Error::Unstable { t, value } => {
                write!(f, "stability violation at t = {t}: field value {value}")
            }
            Error::NoFront => write!(f, "no level-set crossing found"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
