//! Residual-driven refinement of the control points.
//!
//! Each round solves on the current space, measures the L² residual norm on
//! every element and bisects every element above the tolerance. The next
//! round is warm-started from the previous solution interpolated into the
//! refined space.

use crate::error::{Error, Result};
use crate::objective::{CoefficientVector, Discretization, Weighting};
use crate::problem::OdeSystem;
use crate::solver::{solve_auto, solve_from, SolveReport, SolverOptions};
use crate::spline::SplineSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptOptions {
    pub abs_tol: f64,
    pub max_rounds: usize,
    pub max_control_points: usize,
    pub init_elements: usize,
    pub degree: usize,
    pub points_per_element: usize,
    pub weighting: Weighting,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-4,
            max_rounds: 30,
            max_control_points: 2000,
            init_elements: 4,
            degree: 3,
            points_per_element: 8,
            weighting: Weighting::L2,
        }
    }
}

impl AdaptOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidOption("abs_tol must be positive".into()));
        }
        if self.max_rounds == 0
            || self.max_control_points == 0
            || self.init_elements == 0
            || self.points_per_element == 0
        {
            return Err(Error::InvalidOption("adaptivity limits must be at least 1".into()));
        }
        if self.init_elements + 1 > self.max_control_points {
            return Err(Error::BudgetExceeded {
                needed: self.init_elements + 1,
                budget: self.max_control_points,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRecord {
    pub round: usize,
    pub control_points: Vec<f64>,
    pub worst_element_residual: f64,
    pub objective: f64,
}

/// Bisects every element whose residual norm exceeds `abs_tol`.
pub fn mark_and_refine(
    space: &SplineSpace,
    per_element_norms: &[f64],
    abs_tol: f64,
    max_control_points: usize,
) -> Result<SplineSpace> {
    let tau = space.control_points();
    if per_element_norms.len() != space.n_elements() {
        return Err(Error::Dimension {
            expected: space.n_elements(),
            found: per_element_norms.len(),
        });
    }
    let midpoints: Vec<f64> = per_element_norms
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > abs_tol)
        .map(|(e, _)| 0.5 * (tau[e] + tau[e + 1]))
        .collect();
    if midpoints.is_empty() {
        return Ok(space.clone());
    }
    let needed = tau.len() + midpoints.len();
    if needed > max_control_points {
        return Err(Error::BudgetExceeded {
            needed,
            budget: max_control_points,
        });
    }
    space.with_inserted(&midpoints)
}

fn solve_round(
    disc: &Discretization,
    sys: &OdeSystem,
    warm: Option<CoefficientVector>,
    solver_opts: &SolverOptions,
) -> Result<SolveReport> {
    match warm {
        Some(x) if !sys.is_linear() => solve_from(disc, sys, x, solver_opts),
        _ => solve_auto(disc, sys, solver_opts),
    }
}

/// Solve, mark and refine until every element residual is within
/// `abs_tol`. Hitting `max_rounds` or the control-point budget is not an
/// error: the report with the smallest worst-element residual is returned
/// with `converged = false`.
pub fn solve_adaptive(sys: &OdeSystem, opts: &AdaptOptions, solver_opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let mut space = SplineSpace::uniform(opts.degree, sys.t0, sys.t_end, opts.init_elements)?;
    let mut warm: Option<CoefficientVector> = None;
    let mut history = Vec::new();
    let mut best: Option<SolveReport> = None;
    for round in 0..opts.max_rounds {
        let disc = Discretization::build(space.clone(), opts.points_per_element, opts.weighting)?;
        let report = solve_round(&disc, sys, warm.take(), solver_opts)?;
        let worst = report.worst_element();
        history.push(RefinementRecord {
            round,
            control_points: space.control_points().to_vec(),
            worst_element_residual: worst,
            objective: report.objective_final,
        });
        if worst <= opts.abs_tol {
            let mut done = report;
            done.refinement_history = Some(history);
            return Ok(done);
        }
        let refined = match mark_and_refine(&space, &report.per_element_norms, opts.abs_tol, opts.max_control_points) {
            Ok(s) => s,
            Err(Error::BudgetExceeded { .. }) => {
                best = pick_better(best, report);
                break;
            }
            Err(e) => return Err(e),
        };
        let coarse = report.clone();
        warm = Some(CoefficientVector::new(
            refined.interpolate(sys.dim, |t| coarse.eval(t).expect("t inside the domain"))?,
            sys.dim,
        )?);
        best = pick_better(best, report);
        space = refined;
    }
    let mut out = best.expect("at least one round ran");
    out.converged = false;
    out.refinement_history = Some(history);
    Ok(out)
}

fn pick_better(best: Option<SolveReport>, candidate: SolveReport) -> Option<SolveReport> {
    match best {
        Some(b) if b.worst_element() <= candidate.worst_element() => Some(b),
        _ => Some(candidate),
    }
}
