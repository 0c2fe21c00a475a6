//! C ABI over the `lsfem` solver.
//!
//! Problems and solutions are opaque heap handles released with their
//! `*_free` function. Every fallible call returns an [`LsfemStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`lsfem_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lsfem::{
    l2_error, problem, solve_adaptive, solve_auto, AdaptOptions, Discretization, Error, OdeSystem, SolveReport,
    SolverOptions, SplineSpace, Weighting,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsfemStatus {
    Ok = 0,
    /// A solution was produced but an iteration or refinement limit hit first.
    Unconverged = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    UnknownProblem = 4,
    SingularSystem = 5,
    Divergence = 6,
    NoReference = 7,
    Panic = 8,
}

/// Opaque ODE problem.
pub struct LsfemProblem {
    sys: OdeSystem,
}

/// Opaque solution of a solve or adaptive run.
pub struct LsfemSolution {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> LsfemStatus {
    match err {
        Error::UnknownProblem(_) => LsfemStatus::UnknownProblem,
        Error::SingularSystem { .. } => LsfemStatus::SingularSystem,
        Error::Divergence { .. } => LsfemStatus::Divergence,
        Error::NoReference => LsfemStatus::NoReference,
        _ => LsfemStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> LsfemStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> LsfemStatus {
    set_error(&format!("null pointer: {what}"));
    LsfemStatus::NullPointer
}

fn guarded(f: impl FnOnce() -> LsfemStatus) -> LsfemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            LsfemStatus::Panic
        }
    }
}

/// Message of the last failed call on this thread; empty if none.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn lsfem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn lsfem_status_str(status: LsfemStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LsfemStatus::Ok => c"ok",
        LsfemStatus::Unconverged => c"unconverged",
        LsfemStatus::NullPointer => c"null pointer",
        LsfemStatus::InvalidArgument => c"invalid argument",
        LsfemStatus::UnknownProblem => c"unknown problem",
        LsfemStatus::SingularSystem => c"singular system",
        LsfemStatus::Divergence => c"divergence",
        LsfemStatus::NoReference => c"no reference solution",
        LsfemStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Creates a built-in problem by name. `km` is used by
/// `michaelis_menten` only; pass a non-positive value for the default.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsfem_problem_builtin(
    name: *const c_char,
    km: f64,
    out: *mut *mut LsfemProblem,
) -> LsfemStatus {
    guarded(|| {
        if name.is_null() {
            return null("name");
        }
        if out.is_null() {
            return null("out");
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(Error::InvalidOption("name is not UTF-8".into()));
        };
        let sys = if name == "michaelis_menten" && km > 0.0 {
            problem::michaelis_menten(km)
        } else {
            problem::builtin(name)
        };
        match sys {
            Ok(sys) => {
                *out = Box::into_raw(Box::new(LsfemProblem { sys }));
                LsfemStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Creates `y' = A y + b`, `y(t0) = g` on `[t0, t_end]` with constant
/// `A` (`dim × dim`, row-major) and constant `b`.
///
/// # Safety
/// `a` must point to `dim * dim` values, `b` and `g` to `dim` values each.
#[no_mangle]
pub unsafe extern "C" fn lsfem_problem_linear(
    dim: usize,
    a: *const f64,
    b: *const f64,
    g: *const f64,
    t0: f64,
    t_end: f64,
    out: *mut *mut LsfemProblem,
) -> LsfemStatus {
    guarded(|| {
        if a.is_null() || b.is_null() || g.is_null() || out.is_null() {
            return null("a, b, g or out");
        }
        if dim == 0 {
            return fail(Error::InvalidOption("dim must be at least 1".into()));
        }
        let a = std::slice::from_raw_parts(a, dim * dim).to_vec();
        let b = std::slice::from_raw_parts(b, dim).to_vec();
        let g = std::slice::from_raw_parts(g, dim).to_vec();
        let sys = OdeSystem::linear(
            "linear",
            t0,
            t_end,
            g,
            move |_t, m| m.copy_from_slice(&a),
            move |_t, v| v.copy_from_slice(&b),
        );
        match sys {
            Ok(sys) => {
                *out = Box::into_raw(Box::new(LsfemProblem { sys }));
                LsfemStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// State dimension of a problem, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsfem_problem_dim(problem: *const LsfemProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.sys.dim)
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsfem_problem_free(problem: *mut LsfemProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

fn finish(report: SolveReport, out: *mut *mut LsfemSolution) -> LsfemStatus {
    let converged = report.converged;
    // SAFETY: callers check `out` before solving.
    unsafe { *out = Box::into_raw(Box::new(LsfemSolution { report })) };
    if converged {
        LsfemStatus::Ok
    } else {
        set_error("iteration or refinement limit reached");
        LsfemStatus::Unconverged
    }
}

/// Solves on `elements` uniform elements with splines of `degree`.
/// `quad_points = 0` selects `degree + 1` Gauss points per element.
/// On `LSFEM_STATUS_UNCONVERGED` a solution is still stored in `out`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solve(
    problem: *const LsfemProblem,
    degree: usize,
    elements: usize,
    quad_points: usize,
    out: *mut *mut LsfemSolution,
) -> LsfemStatus {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return null("problem");
        };
        if out.is_null() {
            return null("out");
        }
        let n = if quad_points == 0 { degree + 1 } else { quad_points };
        let run = SplineSpace::uniform(degree, p.sys.t0, p.sys.t_end, elements)
            .and_then(|space| Discretization::build(space, n, Weighting::L2))
            .and_then(|disc| solve_auto(&disc, &p.sys, &SolverOptions::default()));
        match run {
            Ok(rep) => finish(rep, out),
            Err(e) => fail(e),
        }
    })
}

/// Adaptive run with default settings and element tolerance `tol`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solve_adaptive(
    problem: *const LsfemProblem,
    tol: f64,
    out: *mut *mut LsfemSolution,
) -> LsfemStatus {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return null("problem");
        };
        if out.is_null() {
            return null("out");
        }
        let opts = AdaptOptions {
            abs_tol: tol,
            ..Default::default()
        };
        match solve_adaptive(&p.sys, &opts, &SolverOptions::default()) {
            Ok(rep) => finish(rep, out),
            Err(e) => fail(e),
        }
    })
}

/// Writes `y^h(t)` into `y[0..len]`; `len` must equal the state dimension.
///
/// # Safety
/// `solution` must be a live handle and `y` point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_eval(
    solution: *const LsfemSolution,
    t: f64,
    y: *mut f64,
    len: usize,
) -> LsfemStatus {
    guarded(|| {
        let Some(s) = solution.as_ref() else {
            return null("solution");
        };
        if y.is_null() {
            return null("y");
        }
        let d = s.report.x_star.state_dim();
        if len != d {
            return fail(Error::Dimension { expected: d, found: len });
        }
        match s.report.eval(t) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(y, len).copy_from_slice(&v);
                LsfemStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Final objective value, NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_objective(solution: *const LsfemSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.report.objective_final)
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_iterations(solution: *const LsfemSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.iterations)
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_converged(solution: *const LsfemSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.report.converged)
}

/// Largest element residual norm.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_worst_residual(solution: *const LsfemSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.report.worst_element())
}

/// Number of breakpoints of the solution's mesh.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_n_control_points(solution: *const LsfemSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.space.control_points().len())
}

/// Copies the breakpoints into `buf[0..len]`; `len` must be at least
/// [`lsfem_solution_n_control_points`].
///
/// # Safety
/// `solution` must be a live handle and `buf` point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_control_points(
    solution: *const LsfemSolution,
    buf: *mut f64,
    len: usize,
) -> LsfemStatus {
    let Some(s) = solution.as_ref() else {
        return null("solution");
    };
    if buf.is_null() {
        return null("buf");
    }
    let tau = s.report.space.control_points();
    if len < tau.len() {
        return fail(Error::Dimension {
            expected: tau.len(),
            found: len,
        });
    }
    std::slice::from_raw_parts_mut(buf, tau.len()).copy_from_slice(tau);
    LsfemStatus::Ok
}

/// L² error against the problem's exact solution.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_l2_error(
    solution: *const LsfemSolution,
    problem: *const LsfemProblem,
    out: *mut f64,
) -> LsfemStatus {
    guarded(|| {
        let (Some(s), Some(p)) = (solution.as_ref(), problem.as_ref()) else {
            return null("solution or problem");
        };
        if out.is_null() {
            return null("out");
        }
        if p.sys.dim != s.report.x_star.state_dim() {
            return fail(Error::Dimension {
                expected: s.report.x_star.state_dim(),
                found: p.sys.dim,
            });
        }
        match l2_error(&s.report.space, &s.report.x_star, &p.sys, 4) {
            Ok(e) => {
                *out = e;
                LsfemStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsfem_solution_free(solution: *mut LsfemSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
