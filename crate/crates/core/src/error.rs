use thiserror::Error;

/// Errors reported by the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spline degree must be at least 1, got {0}")]
    InvalidDegree(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("t = {t} lies outside the domain [{t0}, {t_end}]")]
    OutOfDomain { t: f64, t0: f64, t_end: f64 },

    #[error("interpolation system is singular")]
    InterpolationFailure,

    #[error("unsupported quadrature order {0} (expected 1..=64)")]
    UnsupportedOrder(usize),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite residual at node {node} (t = {t})")]
    NonfiniteResidual { node: usize, t: f64 },

    #[error("problem has no linear part")]
    NotLinear,

    #[error("normal equations are singular (smallest pivot {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("solver diverged after {rejections} consecutive non-finite trial steps")]
    Divergence { rejections: usize },

    #[error("refinement would need {needed} control points (budget {budget})")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("integration blew up after t = {last_t}")]
    BlowUp { last_t: f64 },

    #[error("problem has no exact solution to compare against")]
    NoReference,

    #[error("convergence study failed at h = {h}: {source}")]
    Study {
        h: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

pub type Result<T> = std::result::Result<T, Error>;
