use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use lsfem_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lsfem_last_error()) }.to_string_lossy().into_owned()
}

fn builtin(name: &str, km: f64) -> *mut LsfemProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lsfem_problem_builtin(name.as_ptr(), km, &mut p) }, LsfemStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn decay_roundtrip() {
    let p = builtin("decay", 0.0);
    unsafe {
        assert_eq!(lsfem_problem_dim(p), 1);
        let mut s = ptr::null_mut();
        assert_eq!(lsfem_solve(p, 3, 8, 0, &mut s), LsfemStatus::Ok);
        assert!(lsfem_solution_converged(s));
        assert_eq!(lsfem_solution_n_control_points(s), 9);
        let mut y = [0.0];
        assert_eq!(lsfem_solution_eval(s, 0.5, y.as_mut_ptr(), 1), LsfemStatus::Ok);
        assert!((y[0] - (-0.5f64).exp()).abs() < 1e-6);
        let mut e = f64::NAN;
        assert_eq!(lsfem_solution_l2_error(s, p, &mut e), LsfemStatus::Ok);
        assert!(e > 0.0 && e < 1e-6);
        let mut tau = [0.0; 9];
        assert_eq!(lsfem_solution_control_points(s, tau.as_mut_ptr(), 9), LsfemStatus::Ok);
        assert_eq!(tau[0], 0.0);
        assert_eq!(tau[8], 1.0);
        lsfem_solution_free(s);
        lsfem_problem_free(p);
    }
}

#[test]
fn linear_system_matches_builtin() {
    // y' = y - 2, y(0) = 1  =>  y = 2 - e^t
    let (a, b, g) = ([1.0], [-2.0], [1.0]);
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(lsfem_problem_linear(1, a.as_ptr(), b.as_ptr(), g.as_ptr(), 0.0, 1.0, &mut p), LsfemStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(lsfem_solve(p, 4, 10, 0, &mut s), LsfemStatus::Ok);
        let mut y = [0.0];
        lsfem_solution_eval(s, 1.0, y.as_mut_ptr(), 1);
        assert!((y[0] - (2.0 - 1f64.exp())).abs() < 1e-7);
        let mut e = 0.0;
        assert_eq!(lsfem_solution_l2_error(s, p, &mut e), LsfemStatus::NoReference);
        lsfem_solution_free(s);
        lsfem_problem_free(p);
    }
}

#[test]
fn adaptive_run_reports_mesh() {
    let p = builtin("michaelis_menten", 1.0);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(lsfem_solve_adaptive(p, 1e-4, &mut s), LsfemStatus::Ok);
        assert!(lsfem_solution_worst_residual(s) <= 1e-4);
        assert!(lsfem_solution_n_control_points(s) >= 5);
        lsfem_solution_free(s);
        lsfem_problem_free(p);
    }
}

#[test]
fn unconverged_still_returns_solution() {
    let p = builtin("logistic", 0.0);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(lsfem_solve_adaptive(p, 1e-14, &mut s), LsfemStatus::Unconverged);
        assert!(!s.is_null());
        assert!(!lsfem_solution_converged(s));
        lsfem_solution_free(s);
        lsfem_problem_free(p);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let name = CString::new("nope").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(lsfem_problem_builtin(name.as_ptr(), 0.0, &mut p), LsfemStatus::UnknownProblem);
        assert!(last_error().contains("nope"));
        assert!(p.is_null());
        assert_eq!(lsfem_problem_builtin(ptr::null(), 0.0, &mut p), LsfemStatus::NullPointer);

        let p = builtin("decay", 0.0);
        let mut s = ptr::null_mut();
        assert_eq!(lsfem_solve(p, 0, 4, 0, &mut s), LsfemStatus::InvalidArgument);
        assert!(last_error().contains("degree"));
        assert_eq!(lsfem_solve(ptr::null(), 1, 4, 0, &mut s), LsfemStatus::NullPointer);
        assert_eq!(lsfem_solve(p, 1, 4, 0, &mut s), LsfemStatus::Ok);
        let mut y = [0.0; 2];
        assert_eq!(lsfem_solution_eval(s, 0.5, y.as_mut_ptr(), 2), LsfemStatus::InvalidArgument);
        assert_eq!(lsfem_solution_eval(s, 2.0, y.as_mut_ptr(), 1), LsfemStatus::InvalidArgument);
        assert!(last_error().contains("outside"));
        let mut tau = [0.0; 2];
        assert_eq!(lsfem_solution_control_points(s, tau.as_mut_ptr(), 2), LsfemStatus::InvalidArgument);
        lsfem_solution_free(s);
        lsfem_problem_free(p);

        assert!(lsfem_solution_objective(ptr::null()).is_nan());
        assert_eq!(lsfem_problem_dim(ptr::null()), 0);
        lsfem_problem_free(ptr::null_mut());
        lsfem_solution_free(ptr::null_mut());
        let msg = CStr::from_ptr(lsfem_status_str(LsfemStatus::Divergence));
        assert_eq!(msg.to_str().unwrap(), "divergence");
    }
}

#[test]
fn header_declares_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lsfem.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "lsfem_problem_builtin",
        "lsfem_problem_linear",
        "lsfem_solve",
        "lsfem_solve_adaptive",
        "lsfem_solution_eval",
        "lsfem_solution_free",
        "lsfem_last_error",
        "LSFEM_STATUS_UNCONVERGED = 1",
        "typedef struct LsfemProblem LsfemProblem",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
    // the header must compile as C when a compiler is around
    if let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
    {
        assert!(status.success());
    }
}
