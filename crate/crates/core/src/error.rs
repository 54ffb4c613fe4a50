use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("parse error at line {line}: {msg}")]
    ParseLine { line: usize, msg: String },

    #[error("unknown catalog entry {0:?}")]
    UnknownSeries(String),

    #[error("coefficients for {name} are only available up to n = {available}, requested {requested}")]
    InsufficientCoefficients { name: String, available: u64, requested: u64 },

    #[error("abscissa sigma = {sigma} is below the convergence floor {floor}")]
    BelowConvergenceFloor { sigma: f64, floor: f64 },

    #[error("tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailTooLarge { bound: f64, tol: f64 },

    #[error("integer overflow while {0}")]
    Overflow(String),

    #[error("search bound exhausted: best tau = {best_tau}, best quality = {best_quality:e} (needed < {needed:e})")]
    SearchExhausted { best_tau: f64, best_quality: f64, needed: f64 },

    #[error("quadrature did not settle: doubling the range moved the result by {change:e} (tol {tol:e})")]
    NoConvergence { change: f64, tol: f64 },

    #[error("outside asymptotic regime: {0}")]
    OutsideRegime(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
