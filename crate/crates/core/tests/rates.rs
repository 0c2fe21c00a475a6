use lsfem::metrics::{convergence_study, fit_slope, l2_error, max_error, Method, StudyOptions};
use lsfem::{problem, solve_auto, Discretization, RkMethod, SolverOptions, SplineSpace, Weighting};
use proptest::prelude::*;

proptest! {
    #[test]
    fn slope_ignores_error_scale(
        hs in prop::collection::vec(0.01f64..1.0, 3..10),
        es in prop::collection::vec(1e-8f64..1.0, 10),
        c in 1e-6f64..1e6,
    ) {
        let mut h = hs.clone();
        h.sort_by(|a, b| b.total_cmp(a));
        h.dedup();
        prop_assume!(h.len() >= 2 && h.windows(2).all(|w| w[0] / w[1] > 1.001));
        let e = &es[..h.len()];
        let scaled: Vec<f64> = e.iter().map(|v| v * c).collect();
        let a = fit_slope(&h, e).unwrap();
        let b = fit_slope(&h, &scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}

#[test]
fn decay_spline_rates_fall_in_band() {
    let sys = problem::decay().unwrap();
    let opts = StudyOptions::unit_steps(&sys);
    for k in 1..=5 {
        let st = convergence_study(&sys, Method::Spline { degree: k }, &opts).unwrap();
        let lo = k as f64 + 0.8;
        let hi = k as f64 + 1.3;
        assert!(st.slope > lo && st.slope < hi, "k={k} slope={}", st.slope);
        // errors shrink overall along the sequence
        assert!(st.errors.last().unwrap() < &st.errors[0]);
    }
}

#[test]
fn rk_rates_match_their_order() {
    let sys = problem::decay().unwrap();
    let opts = StudyOptions::unit_steps(&sys);
    for (m, p) in [(RkMethod::Rk3, 3.0), (RkMethod::Rk4, 4.0)] {
        let st = convergence_study(&sys, Method::Rk(m), &opts).unwrap();
        assert!((st.slope - p).abs() < 0.2, "{} {}", m.name(), st.slope);
    }
}

#[test]
fn oversampling_does_not_move_the_error() {
    let sys = problem::logistic().unwrap();
    let space = SplineSpace::uniform(2, sys.t0, sys.t_end, 20).unwrap();
    let disc = Discretization::build(space, 3, Weighting::L2).unwrap();
    let rep = solve_auto(&disc, &sys, &SolverOptions::default()).unwrap();
    let a = l2_error(&rep.space, &rep.x_star, &sys, 2).unwrap();
    let b = l2_error(&rep.space, &rep.x_star, &sys, 4).unwrap();
    assert!((a - b).abs() <= 1e-3 * b, "{a} {b}");
}

#[test]
fn pointwise_and_l2_errors_are_comparable() {
    let sys = problem::decay().unwrap();
    let space = SplineSpace::uniform(1, 0.0, 1.0, 2).unwrap();
    let disc = Discretization::build(space, 2, Weighting::L2).unwrap();
    let rep = solve_auto(&disc, &sys, &SolverOptions::default()).unwrap();
    let l2 = l2_error(&rep.space, &rep.x_star, &sys, 4).unwrap();
    let mx = max_error(&rep.space, &rep.x_star, &sys, 1001).unwrap();
    let avg = l2 / (sys.t_end - sys.t0).sqrt();
    assert!(mx >= avg && mx <= 3.0 * avg, "max={mx} l2={l2}");
}

#[test]
fn study_records_every_mesh() {
    let sys = problem::logistic().unwrap();
    let opts = StudyOptions {
        elements: vec![40, 10, 20, 80],
        ..Default::default()
    };
    let st = convergence_study(&sys, Method::Rk(RkMethod::Rk4), &opts).unwrap();
    assert_eq!(st.mesh_sizes, vec![1.0, 0.5, 0.25, 0.125]);
    assert_eq!(st.fitted, vec![false, false, true, true]);
    assert_eq!(st.label, "rk4");
    let csv = st.to_csv();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("h,error\n1.0,"));
}
