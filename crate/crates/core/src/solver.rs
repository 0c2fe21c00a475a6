//! Levenberg–Marquardt minimization of the discrete objective.
//!
//! Steps solve `(JᵀJ + λ diag(JᵀJ)) δ = −Jᵀr` in band storage. A step is
//! accepted iff it lowers the objective; λ shrinks by `lm_down` on success
//! and grows by `lm_up` on failure. Once λ drops below [`LAMBDA_FLOOR`] the
//! iteration continues with pure Gauss–Newton steps until one is rejected.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::adapt::RefinementRecord;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::objective::{CoefficientVector, Discretization};
use crate::problem::OdeSystem;
use crate::spline::SplineSpace;

pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Consecutive non-finite trial points tolerated before giving up.
pub const MAX_NONFINITE_REJECTIONS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop when `‖∇J‖_∞ ≤ gradient_tol (1 + J)`.
    pub gradient_tol: f64,
    /// Stop when `‖δ‖_∞ ≤ step_tol (1 + ‖x‖_∞)`.
    pub step_tol: f64,
    pub lm_lambda0: f64,
    pub lm_up: f64,
    pub lm_down: f64,
    pub multistart: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            lm_lambda0: 1e-3,
            lm_up: 10.0,
            lm_down: 0.1,
            multistart: 1,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOption(msg.to_string()));
        if !(self.gradient_tol > 0.0) || !(self.step_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.lm_lambda0 >= 0.0) {
            return bad("lm_lambda0 must be non-negative");
        }
        if !(self.lm_up > 1.0 && self.lm_down > 0.0 && self.lm_down < 1.0) {
            return bad("need lm_up > 1 > lm_down > 0");
        }
        if self.max_iterations == 0 || self.multistart == 0 {
            return bad("max_iterations and multistart must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergedBy {
    Gradient,
    Step,
    MaxIter,
    /// Linear problem solved directly from the normal equations.
    Direct,
}

impl ConvergedBy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gradient => "gradient",
            Self::Step => "step",
            Self::MaxIter => "max_iter",
            Self::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Space the coefficients live in (changes under adaptive refinement).
    pub space: SplineSpace,
    pub x_star: CoefficientVector,
    pub objective_final: f64,
    pub gradient_norm_final: f64,
    pub iterations: usize,
    pub per_element_norms: Vec<f64>,
    pub converged_by: ConvergedBy,
    /// False when an iteration or refinement limit ended the run.
    pub converged: bool,
    pub condition_estimate: Option<f64>,
    pub refinement_history: Option<Vec<RefinementRecord>>,
}

impl SolveReport {
    pub fn worst_element(&self) -> f64 {
        self.per_element_norms.iter().cloned().fold(0.0, f64::max)
    }

    /// `y^h(t)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self
            .space
            .eval_function(self.x_star.state_dim(), self.x_star.as_slice(), t)?
            .0)
    }
}

/// Forward-Euler values at the breakpoints, interpolated into the space.
/// Falls back to the constant `g` if the sweep produces non-finite values.
pub fn initial_guess(space: &SplineSpace, sys: &OdeSystem) -> CoefficientVector {
    let d = sys.dim;
    let tau = space.control_points();
    let mut values = vec![sys.initial.clone()];
    for w in tau.windows(2) {
        let y = values.last().unwrap();
        let g = sys.eval_rhs(w[0], y);
        values.push(y.iter().zip(&g).map(|(a, b)| a + (w[1] - w[0]) * b).collect());
    }
    let finite = values.iter().flatten().all(|v| v.is_finite());
    if finite {
        let polyline = |t: f64| {
            let e = space.element_of(t).unwrap_or(0);
            let s = (t - tau[e]) / (tau[e + 1] - tau[e]);
            (0..d)
                .map(|c| (1.0 - s) * values[e][c] + s * values[e + 1][c])
                .collect::<Vec<f64>>()
        };
        if let Ok(x) = space.interpolate(d, polyline) {
            if x.iter().all(|v| v.is_finite()) {
                return CoefficientVector::new(x, d).expect("sized by construction");
            }
        }
    }
    CoefficientVector::constant(space.dim(), &sys.initial)
}

struct State {
    x: CoefficientVector,
    objective: f64,
    gradient: Vec<f64>,
    normal: crate::linalg::BandedSym,
    per_element_norms: Vec<f64>,
}

fn linearize(disc: &Discretization, sys: &OdeSystem, x: CoefficientVector) -> Result<State> {
    let res = disc.residual(sys, &x)?;
    let jac = disc.residual_jacobian(sys, &x)?;
    Ok(State {
        gradient: jac.transpose_mul(&res.stacked()),
        normal: jac.normal_matrix(),
        objective: res.objective(),
        per_element_norms: res.per_element_norms,
        x,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// One undamped Gauss–Newton step `x − (JᵀJ)⁻¹ Jᵀr`.
pub fn gauss_newton_step(
    disc: &Discretization,
    sys: &OdeSystem,
    x: &CoefficientVector,
) -> Result<CoefficientVector> {
    let st = linearize(disc, sys, x.clone())?;
    let neg: Vec<f64> = st.gradient.iter().map(|g| -g).collect();
    let (delta, _) = solve_spd(&st.normal, &neg)?;
    let next: Vec<f64> = x.as_slice().iter().zip(&delta).map(|(a, b)| a + b).collect();
    CoefficientVector::new(next, sys.dim)
}

/// Minimizes from the Euler warm start.
pub fn solve(disc: &Discretization, sys: &OdeSystem, opts: &SolverOptions) -> Result<SolveReport> {
    let x0 = initial_guess(disc.space(), sys);
    solve_from(disc, sys, x0, opts)
}

/// Minimizes from a caller-supplied start.
pub fn solve_from(
    disc: &Discretization,
    sys: &OdeSystem,
    x0: CoefficientVector,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let mut st = match linearize(disc, sys, x0) {
        Ok(s) => s,
        Err(Error::NonfiniteResidual { .. }) => {
            linearize(disc, sys, CoefficientVector::constant(disc.space().dim(), &sys.initial))?
        }
        Err(e) => return Err(e),
    };
    let mut lambda = opts.lm_lambda0;
    let mut iterations = 0;
    let mut nonfinite = 0;
    let mut polished = false;
    let converged_by = loop {
        let gnorm = inf_norm(&st.gradient);
        if gnorm <= opts.gradient_tol * (1.0 + st.objective) {
            // The gradient test is blind to weakly observed directions of an
            // ill-conditioned Jacobian, so finish with one undamped step.
            if gnorm == 0.0 || lambda == 0.0 || polished || iterations >= opts.max_iterations {
                break ConvergedBy::Gradient;
            }
            polished = true;
            lambda = 0.0;
        }
        if iterations >= opts.max_iterations {
            break ConvergedBy::MaxIter;
        }
        iterations += 1;

        let mut damped = st.normal.clone();
        if lambda > 0.0 {
            for (i, v) in st.normal.diagonal().into_iter().enumerate() {
                damped.add(i, i, lambda * v.max(f64::MIN_POSITIVE));
            }
        }
        let neg: Vec<f64> = st.gradient.iter().map(|g| -g).collect();
        let delta = match solve_spd(&damped, &neg) {
            Ok((d, _)) => d,
            Err(_) => {
                lambda = (lambda * opts.lm_up).max(opts.lm_lambda0).max(LAMBDA_FLOOR);
                continue;
            }
        };
        let step_small =
            inf_norm(&delta) <= opts.step_tol * (1.0 + st.x.max_abs());
        let trial: Vec<f64> = st.x.as_slice().iter().zip(&delta).map(|(a, b)| a + b).collect();
        let trial = CoefficientVector::new(trial, sys.dim)?;
        let objective = match disc.objective(sys, &trial) {
            Ok(f) if f.is_finite() => {
                nonfinite = 0;
                f
            }
            Ok(_) | Err(Error::NonfiniteResidual { .. }) => {
                nonfinite += 1;
                if nonfinite >= MAX_NONFINITE_REJECTIONS {
                    return Err(Error::Divergence { rejections: nonfinite });
                }
                lambda = (lambda * opts.lm_up).max(opts.lm_lambda0).max(LAMBDA_FLOOR);
                continue;
            }
            Err(e) => return Err(e),
        };
        if objective < st.objective || (polished && lambda == 0.0 && objective <= st.objective) {
            st = linearize(disc, sys, trial)?;
            lambda *= opts.lm_down;
            if lambda < LAMBDA_FLOOR {
                lambda = 0.0;
            }
            if step_small {
                break if polished { ConvergedBy::Gradient } else { ConvergedBy::Step };
            }
        } else {
            if step_small {
                break if polished { ConvergedBy::Gradient } else { ConvergedBy::Step };
            }
            lambda = if lambda == 0.0 {
                opts.lm_lambda0.max(LAMBDA_FLOOR)
            } else {
                lambda * opts.lm_up
            };
        }
    };
    Ok(SolveReport {
        space: disc.space().clone(),
        gradient_norm_final: inf_norm(&st.gradient),
        objective_final: st.objective,
        iterations,
        per_element_norms: st.per_element_norms,
        converged: converged_by != ConvergedBy::MaxIter,
        converged_by,
        condition_estimate: None,
        refinement_history: None,
        x_star: st.x,
    })
}

/// Direct solve for linear problems, otherwise [`multistart_solve`]
/// (which is [`solve`] when `multistart == 1`).
pub fn solve_auto(disc: &Discretization, sys: &OdeSystem, opts: &SolverOptions) -> Result<SolveReport> {
    if sys.is_linear() {
        crate::linear::solve_linear(disc, sys)
    } else {
        multistart_solve(disc, sys, opts)
    }
}

/// Runs [`solve`] from the warm start and `multistart − 1` Gaussian
/// perturbations of it (σ = 0.5 (1 + ‖x₀‖_∞), seeded), keeping the lowest
/// objective. Ties go to the earliest start.
pub fn multistart_solve(disc: &Discretization, sys: &OdeSystem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let x0 = initial_guess(disc.space(), sys);
    if opts.multistart == 1 {
        return solve_from(disc, sys, x0, opts);
    }
    let sigma = 0.5 * (1.0 + x0.max_abs());
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidOption(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0.clone()];
    for _ in 1..opts.multistart {
        let v: Vec<f64> = x0.as_slice().iter().map(|a| a + normal.sample(&mut rng)).collect();
        starts.push(CoefficientVector::new(v, sys.dim)?);
    }
    let results: Vec<Result<SolveReport>> = starts
        .into_par_iter()
        .map(|x| solve_from(disc, sys, x, opts))
        .collect();
    let mut best: Option<SolveReport> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| rep.objective_final < b.objective_final) {
                    best = Some(rep);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}
