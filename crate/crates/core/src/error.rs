use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("the zero series has no inverse")]
    NotInvertible,
    #[error("coefficient of p^{exp} is not determined (series known below p^{order})")]
    BeyondOrder { exp: i64, order: i64 },
    #[error("unknown series name `{0}`")]
    UnknownSeries(String),
    #[error("point {re} + {im}i is not in the upper half-plane")]
    NotInUpperHalfPlane { re: f64, im: f64 },
    #[error("fundamental-domain reduction did not finish within {0} steps")]
    ReductionNonConvergence(usize),
    #[error("letter {0} is not in the theta group")]
    NotThetaWord(&'static str),
    #[error("no form with eps = - and n = 0")]
    NoSuchForm,
    #[error("kernel evaluated at J(tau) ~ J(z): |J(tau) - J(z)| = {gap:e}")]
    PoleProximity { gap: f64 },
    #[error("quadrature did not converge: best estimate {best} with error estimate {err_est:e}")]
    QuadratureNonConvergence { best: f64, err_est: f64 },
    #[error("the Laplace representation of index {n} needs x^2 > {n}, got x = {x}")]
    LaplaceOutOfRange { n: usize, x: f64 },
    #[error("cutoff {cutoff} too small: |f(cutoff)| = {value:e}")]
    CutoffViolation { cutoff: f64, value: f64 },
    #[error("expected a {expected} sample set")]
    ParityMismatch { expected: &'static str },
    #[error("malformed sample set: {0}")]
    InvalidSampleSet(String),
}

pub type Result<T> = std::result::Result<T, Error>;
