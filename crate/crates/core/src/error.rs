use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series did not converge within {max_terms} terms ({context})")]
    NonConvergence { context: &'static str, max_terms: usize },

    #[error("argument outside the domain of {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("{op} overflows for argument {arg} (threshold {threshold})")]
    Overflow {
        op: &'static str,
        arg: f64,
        threshold: f64,
    },

    #[error("quadrature did not stabilise after {levels} refinement levels (last change {last_change:e})")]
    QuadratureFailure { levels: usize, last_change: f64 },

    #[error("finite-difference stencil leaves the unit ball at |x| = {norm}")]
    StencilOutsideBall { norm: f64 },

    #[error("finite-difference stencil crosses the boundary t = 0 (t = {t}, step = {step})")]
    Stencil { t: f64, step: f64 },

    #[error("radial superlevel path requires a strictly decreasing radial profile")]
    NonMonotoneRadial,

    #[error("no negativity witness found for n = {n} (best value {best:e}, margin {margin:e})")]
    NoWitnessFound { n: usize, best: f64, margin: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        op,
        detail: detail.into(),
    }
}
