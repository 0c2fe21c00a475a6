use lsfem::problem::{self, BUILTIN_NAMES};
use lsfem::{CoefficientVector, Discretization, SplineSpace, Weighting};
use proptest::prelude::*;

fn disc(sys: &lsfem::OdeSystem, k: usize, n: usize, w: Weighting) -> Discretization {
    let space = SplineSpace::uniform(k, sys.t0, sys.t_end, n).unwrap();
    Discretization::build(space, k + 2, w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences(
        which in 0usize..4,
        k in 1usize..4,
        n in 1usize..5,
        plain in any::<bool>(),
        seed in prop::collection::vec(0.2f64..1.5, 16),
    ) {
        let sys = problem::builtin(BUILTIN_NAMES[which]).unwrap();
        let w = if plain { Weighting::Plain } else { Weighting::L2 };
        let d = disc(&sys, k, n, w);
        let m = d.space().dim();
        let x = CoefficientVector::new(seed[..m].to_vec(), 1).unwrap();
        let g = d.gradient(&sys, &x).unwrap();
        for i in 0..m {
            let h = 1e-6 * (1.0 + x.as_slice()[i].abs());
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[i] -= h;
            let fd = (d.objective(&sys, &xp).unwrap() - d.objective(&sys, &xm).unwrap()) / (2.0 * h);
            let scale = g[i].abs().max(1.0);
            prop_assert!((g[i] - fd).abs() <= 1e-5 * scale, "{} i={} g={} fd={}", BUILTIN_NAMES[which], i, g[i], fd);
        }
    }

    #[test]
    fn objective_is_half_squared_residual(k in 1usize..4, n in 1usize..6, seed in prop::collection::vec(-2.0f64..2.0, 16)) {
        let sys = problem::fig1().unwrap();
        let d = disc(&sys, k, n, Weighting::L2);
        let x = CoefficientVector::new(seed[..d.space().dim()].to_vec(), 1).unwrap();
        let r = d.residual(&sys, &x).unwrap();
        let half: f64 = 0.5 * r.stacked().iter().map(|v| v * v).sum::<f64>();
        prop_assert!((r.objective() - half).abs() <= 1e-12 * half.max(1.0));
        // per-element norms split the ODE part of the objective
        let ode: f64 = r.per_element_norms.iter().map(|v| v * v).sum();
        let ic: f64 = r.ic_residual.iter().map(|v| v * v).sum();
        prop_assert!((0.5 * (ode + ic) - half).abs() <= 1e-10 * half.max(1.0));
        prop_assert_eq!(r.per_element_norms.len(), n);
    }
}

#[test]
fn exact_representable_solution_has_zero_objective() {
    // y' = 2t, y(0) = 1 lies in every space of degree >= 2
    let sys = lsfem::OdeSystem::new("poly", 0.0, 2.0, vec![1.0], |t, _y, o| o[0] = 2.0 * t).unwrap();
    let d = disc(&sys, 2, 3, Weighting::L2);
    let x = d.space().interpolate(1, |t| vec![1.0 + t * t]).unwrap();
    let x = CoefficientVector::new(x, 1).unwrap();
    assert!(d.objective(&sys, &x).unwrap() < 1e-26);
    assert!(d.gradient(&sys, &x).unwrap().iter().all(|g| g.abs() < 1e-12));
}

#[test]
fn l2_weighting_integrates_the_squared_residual() {
    // y = 0 against y' = 1: residual is -1 everywhere, so J = (T - t0)/2 + 0
    let sys = lsfem::OdeSystem::new("one", 0.0, 3.0, vec![0.0], |_t, _y, o| o[0] = 1.0).unwrap();
    for n in [1, 4, 7] {
        let d = disc(&sys, 2, n, Weighting::L2);
        let x = CoefficientVector::zeros(d.space().dim(), 1);
        assert!((d.objective(&sys, &x).unwrap() - 1.5).abs() < 1e-14);
    }
}
