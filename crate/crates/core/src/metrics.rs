//! Error norms against the exact solution and convergence-rate fits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{eval_solution, CoefficientVector, Discretization, Weighting};
use crate::problem::OdeSystem;
use crate::quadrature::{QuadraturePlan, MAX_ORDER};
use crate::rk::{integrate, RkMethod};
use crate::solver::{solve_auto, SolverOptions};
use crate::spline::SplineSpace;

/// `‖y^h − y‖_{L²}` with `oversample · (k+1)` Gauss points per element.
pub fn l2_error(space: &SplineSpace, x: &CoefficientVector, sys: &OdeSystem, oversample: usize) -> Result<f64> {
    if sys.exact.is_none() {
        return Err(Error::NoReference);
    }
    let n = (oversample.max(1) * (space.degree() + 1)).min(MAX_ORDER);
    let plan = QuadraturePlan::new(space, n)?;
    let mut acc = 0.0;
    for (&t, &w) in plan.nodes.iter().zip(&plan.weights) {
        let (y, _) = eval_solution(space, x, t)?;
        let e = sys.eval_exact(t).ok_or(Error::NoReference)?;
        acc += w * y.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(acc.sqrt())
}

/// Largest Euclidean error over `n_samples` uniform points (endpoints included).
pub fn max_error(space: &SplineSpace, x: &CoefficientVector, sys: &OdeSystem, n_samples: usize) -> Result<f64> {
    if sys.exact.is_none() {
        return Err(Error::NoReference);
    }
    let n = n_samples.max(2);
    let (a, b) = (space.t0(), space.t_end());
    let mut worst = 0.0f64;
    for i in 0..n {
        let t = if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 };
        let (y, _) = eval_solution(space, x, t)?;
        let e = sys.eval_exact(t).ok_or(Error::NoReference)?;
        worst = worst.max(y.iter().zip(&e).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt());
    }
    Ok(worst)
}

/// `‖y‖_{L²}` of the exact solution, using the plan's nodes.
fn exact_norm(sys: &OdeSystem, plan: &QuadraturePlan) -> Result<f64> {
    let mut acc = 0.0;
    for (&t, &w) in plan.nodes.iter().zip(&plan.weights) {
        let e = sys.eval_exact(t).ok_or(Error::NoReference)?;
        acc += w * e.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(acc.sqrt())
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_slope(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            found: e.len(),
        });
    }
    if h.len() < 2 {
        return Err(Error::InvalidOption("slope fit needs at least two points".into()));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidOption("slope fit needs distinct mesh sizes".into()));
    }
    Ok(sxy / sxx)
}

/// What to run on each mesh of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Least-squares spline of the given degree.
    Spline { degree: usize },
    /// Runge–Kutta with step equal to the mesh size.
    Rk(RkMethod),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Self::Spline { degree } => format!("k{degree}"),
            Self::Rk(m) => m.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Element counts, one mesh per entry.
    pub elements: Vec<usize>,
    /// Gauss points per element; `None` means `k + 1`.
    pub points_per_element: Option<usize>,
    pub weighting: Weighting,
    pub solver: SolverOptions,
    /// Number of coarsest meshes left out of the slope fit.
    pub skip_coarsest: usize,
    /// Oversampling factor of the L² error rule.
    pub oversample: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            elements: (1..=20).collect(),
            points_per_element: None,
            weighting: Weighting::L2,
            solver: SolverOptions::default(),
            skip_coarsest: 2,
            oversample: 4,
        }
    }
}

impl StudyOptions {
    /// Meshes with `h = 1/N`, `N = 1..=20`, on a problem of length `L`
    /// (`round(N L)` elements, at least one).
    pub fn unit_steps(sys: &OdeSystem) -> Self {
        let len = sys.t_end - sys.t0;
        let mut elements: Vec<usize> = (1..=20).map(|n| ((n as f64 * len).round() as usize).max(1)).collect();
        elements.dedup();
        Self {
            elements,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub label: String,
    /// Strictly decreasing.
    pub mesh_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    /// Which points entered the slope fit.
    pub fitted: Vec<bool>,
    pub slope: f64,
}

impl ConvergenceStudy {
    /// `h,error` rows followed by `slope=<value>`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,error\n");
        for (h, e) in self.mesh_sizes.iter().zip(&self.errors) {
            s.push_str(&format!("{h:?},{e:?}\n"));
        }
        s.push_str(&format!("slope={:?}\n", self.slope));
        s
    }
}

fn spline_error(sys: &OdeSystem, degree: usize, n_el: usize, opts: &StudyOptions) -> Result<f64> {
    let space = SplineSpace::uniform(degree, sys.t0, sys.t_end, n_el)?;
    let n = opts.points_per_element.unwrap_or(degree + 1);
    let disc = Discretization::build(space, n, opts.weighting)?;
    let rep = solve_auto(&disc, sys, &opts.solver)?;
    l2_error(&rep.space, &rep.x_star, sys, opts.oversample)
}

/// Solves on every mesh (in parallel), records the L² error and fits the
/// rate. The fit leaves out the `skip_coarsest` coarsest meshes and any
/// error below `100 ε ‖y‖`, where round-off dominates.
pub fn convergence_study(sys: &OdeSystem, method: Method, opts: &StudyOptions) -> Result<ConvergenceStudy> {
    if sys.exact.is_none() {
        return Err(Error::NoReference);
    }
    if opts.elements.is_empty() {
        return Err(Error::InvalidOption("empty mesh list".into()));
    }
    let mut elements = opts.elements.clone();
    elements.sort_unstable();
    if elements[0] == 0 || elements.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidOption("element counts must be distinct and positive".into()));
    }
    let len = sys.t_end - sys.t0;
    let errors: Vec<f64> = elements
        .par_iter()
        .map(|&n| {
            let h = len / n as f64;
            match method {
                Method::Spline { degree } => spline_error(sys, degree, n, opts),
                Method::Rk(m) => integrate(sys, m, h).and_then(|tr| tr.nodal_l2_error(sys)),
            }
            .map_err(|e| Error::Study { h, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mesh_sizes: Vec<f64> = elements.iter().map(|&n| len / n as f64).collect();

    let finest = SplineSpace::uniform(1, sys.t0, sys.t_end, *elements.last().unwrap())?;
    let floor = 100.0 * f64::EPSILON * exact_norm(sys, &QuadraturePlan::new(&finest, 8)?)?;
    let fitted: Vec<bool> = errors
        .iter()
        .enumerate()
        .map(|(i, &e)| i >= opts.skip_coarsest && e > floor)
        .collect();
    let (hs, es): (Vec<f64>, Vec<f64>) = mesh_sizes
        .iter()
        .zip(&errors)
        .zip(&fitted)
        .filter(|(_, &f)| f)
        .map(|((h, e), _)| (*h, *e))
        .unzip();
    let slope = fit_slope(&hs, &es)?;
    Ok(ConvergenceStudy {
        label: method.label(),
        mesh_sizes,
        errors,
        fitted,
        slope,
    })
}
