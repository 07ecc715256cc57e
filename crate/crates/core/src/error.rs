use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "singular pencil: pivot {pivot:.3e} below threshold {threshold:.3e} \
         (an eigenvalue sum of the coefficient matrices is numerically zero)"
    )]
    SingularPencil { pivot: f64, threshold: f64 },

    #[error(
        "splitting iteration diverged or stalled after {iterations} iterations \
         (last update {last_update:.3e}, residual {residual:.3e})"
    )]
    IterationDivergence {
        iterations: usize,
        last_update: f64,
        residual: f64,
    },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("system is not mean-square asymptotically stable (spectral abscissa {abscissa:.6e})")]
    Unstable { abscissa: f64 },

    #[error("eigenspace at the spectral abscissa contains no positive semidefinite element (min eigenvalue {min_eigenvalue:.3e})")]
    DegenerateEigenspace { min_eigenvalue: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error(
        "squared bound factor is negative beyond round-off: trP={tr_p:.6e}, \
         tr(P^ V^T V)={tr_phat:.6e}, tr(P2 V^T)={tr_p2vt:.6e}"
    )]
    NegativeRadicand {
        tr_p: f64,
        tr_phat: f64,
        tr_p2vt: f64,
    },

    #[error("truncation ill-conditioned: sigma_r / sigma_1 = {ratio:.3e}")]
    IllConditionedTruncation { ratio: f64 },

    #[error("input evaluation produced a non-finite value at t = {t}")]
    InputEvaluation { t: f64 },

    #[error("quadrature did not reach relative tolerance {tolerance:.1e} (last estimates {previous:.12e}, {current:.12e})")]
    Quadrature {
        tolerance: f64,
        previous: f64,
        current: f64,
    },

    #[error("step matrix I - hA is singular for h = {h:.3e}")]
    StepSize { h: f64 },

    #[error("adaptive integrator step size underflow at t = {t:.6e} (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    #[error("{0} decomposition failed to converge")]
    Decomposition(&'static str),

    #[error("malformed system file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
