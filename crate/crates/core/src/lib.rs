//! Least-squares spline solver for initial value problems `y' = G(t, y)`,
//! `y(t0) = g`.
//!
//! The solution is a clamped B-spline `y^h(t) = Σ φ_i(t) x_i`. The
//! coefficients minimize the Gauss-quadrature discretization of
//! `½∫‖y' − G‖² + ½‖y(t0) − g‖²`: directly through the normal equations for
//! linear problems and by damped Gauss–Newton otherwise.

pub mod adapt;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod objective;
pub mod problem;
pub mod quadrature;
pub mod rk;
pub mod solver;
pub mod spline;

pub use adapt::{mark_and_refine, solve_adaptive, AdaptOptions, RefinementRecord};
pub use error::{Error, Result};
pub use linear::solve_linear;
pub use metrics::{convergence_study, fit_slope, l2_error, max_error, ConvergenceStudy, Method, StudyOptions};
pub use objective::{CoefficientVector, Discretization, ResidualBundle, Weighting};
pub use problem::{builtin, OdeSystem};
pub use quadrature::{gauss_legendre, QuadraturePlan};
pub use rk::{rk3, rk4, FdmTrajectory, RkMethod};
pub use solver::{multistart_solve, solve, solve_auto, solve_from, ConvergedBy, SolveReport, SolverOptions};
pub use spline::SplineSpace;
