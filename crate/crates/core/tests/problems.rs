use lsfem::problem::{self, BUILTIN_NAMES};
use lsfem::OdeSystem;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples(sys: &OdeSystem, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| sys.t0 + (sys.t_end - sys.t0) * (i as f64 + 0.5) / n as f64)
        .collect()
}

#[test]
fn exact_solutions_satisfy_their_equations() {
    for name in BUILTIN_NAMES {
        let sys = problem::builtin(name).unwrap();
        let y0 = sys.eval_exact(sys.t0).unwrap();
        assert!((y0[0] - sys.initial[0]).abs() < 1e-10, "{name}");
        for t in samples(&sys, 200) {
            let h = 1e-6 * (1.0 + t.abs());
            // skip the stencil straddling t0 / T
            if t - h < sys.t0 || t + h > sys.t_end {
                continue;
            }
            let (a, b) = (sys.eval_exact(t - h).unwrap(), sys.eval_exact(t + h).unwrap());
            let dy = (b[0] - a[0]) / (2.0 * h);
            let g = sys.eval_rhs(t, &sys.eval_exact(t).unwrap());
            // central differences carry O(h²) truncation and O(ε/h) rounding
            let tol = if name == "michaelis_menten" { 1e-6 } else { 1e-8 };
            assert!((dy - g[0]).abs() < tol, "{name} t={t} dy={dy} g={}", g[0]);
        }
    }
}

#[test]
fn michaelis_menten_relation_holds() {
    for km in [0.005, 0.1, 1.0] {
        for i in 0..=60 {
            let t = 3.0 * i as f64 / 60.0;
            let y = problem::michaelis_menten_exact(km, t);
            if y > 1e-250 {
                assert!((y + km * y.ln() - (1.0 - t)).abs() < 1e-12, "km={km} t={t}");
            }
        }
    }
}

#[test]
fn jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in BUILTIN_NAMES {
        let sys = problem::builtin(name).unwrap();
        for _ in 0..50 {
            let t = rng.random_range(sys.t0..sys.t_end);
            let y = [rng.random_range(0.05..2.0)];
            let mut jac = [0.0];
            sys.eval_jacobian(t, &y, &mut jac);
            let h = 1e-6 * (1.0 + y[0].abs());
            let fd = (sys.eval_rhs(t, &[y[0] + h])[0] - sys.eval_rhs(t, &[y[0] - h])[0]) / (2.0 * h);
            assert!((jac[0] - fd).abs() <= 1e-5 * jac[0].abs().max(1.0), "{name}");
        }
    }
}

#[test]
fn linear_parts_agree_with_rhs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in ["fig1", "decay"] {
        let sys = problem::builtin(name).unwrap();
        let lin = sys.linear.as_ref().unwrap();
        for _ in 0..20 {
            let t = rng.random_range(sys.t0..sys.t_end);
            let y = [rng.random_range(-3.0..3.0)];
            let (mut a, mut b) = ([0.0], [0.0]);
            (lin.a)(t, &mut a);
            (lin.b)(t, &mut b);
            assert!((sys.eval_rhs(t, &y)[0] - (a[0] * y[0] + b[0])).abs() < 1e-10);
        }
    }
}

#[test]
fn autonomize_adds_a_clock() {
    let sys = problem::decay().unwrap().autonomize();
    assert_eq!(sys.dim, 2);
    assert_eq!(sys.initial, vec![0.0, 1.0]);
    assert_eq!(sys.eval_rhs(0.3, &[0.3, 2.0]), vec![1.0, -2.0]);

    let twice = problem::decay().unwrap().autonomize().autonomize();
    assert_eq!(twice.dim, 3);
    assert_eq!(twice.eval_rhs(0.0, &[0.0, 0.0, 1.0])[..2], [1.0, 1.0]);

    let fig = problem::fig1().unwrap();
    let lifted = fig.autonomize();
    for t in samples(&fig, 25) {
        let z = lifted.eval_exact(t).unwrap();
        assert!((z[0] - t).abs() < 1e-15);
        assert!((z[1] - fig.eval_exact(t).unwrap()[0]).abs() < 1e-15);
        // residual of the lifted exact solution vanishes
        let g = lifted.eval_rhs(t, &z);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[1] - (-(-t).exp())).abs() < 1e-12);
    }
}

#[test]
fn builtin_errors() {
    assert!(problem::builtin("fig2").is_err());
    assert!(problem::michaelis_menten(0.0).is_err());
    assert!(problem::michaelis_menten(-1.0).is_err());
}
