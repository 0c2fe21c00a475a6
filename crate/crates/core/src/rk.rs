//! Fixed-step explicit Runge–Kutta baselines.

use crate::error::{Error, Result};
use crate::problem::OdeSystem;
use crate::quadrature::QuadraturePlan;

#[derive(Debug, Clone, PartialEq)]
pub struct FdmTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// The last step was shortened to land on `t_end`.
    pub partial_last_step: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkMethod {
    /// Kutta's third-order method, weights (1/6, 2/3, 1/6).
    Rk3,
    /// Classical fourth-order method.
    Rk4,
}

impl RkMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rk3 => "rk3",
            Self::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for RkMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk3" => Ok(Self::Rk3),
            "rk4" => Ok(Self::Rk4),
            other => Err(Error::InvalidOption(format!("unknown method '{other}'"))),
        }
    }
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(u, v)| u + a * v).collect()
}

fn step(sys: &OdeSystem, method: RkMethod, t: f64, y: &[f64], h: f64) -> Vec<f64> {
    let f = |t: f64, y: &[f64]| sys.eval_rhs(t, y);
    match method {
        RkMethod::Rk3 => {
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
            let tmp: Vec<f64> = (0..y.len()).map(|i| y[i] - h * k1[i] + 2.0 * h * k2[i]).collect();
            let k3 = f(t + h, &tmp);
            (0..y.len())
                .map(|i| y[i] + h * (k1[i] + 4.0 * k2[i] + k3[i]) / 6.0)
                .collect()
        }
        RkMethod::Rk4 => {
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
            let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
            let k4 = f(t + h, &axpy(y, h, &k3));
            (0..y.len())
                .map(|i| y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
                .collect()
        }
    }
}

/// Integrates from `t0` to `t_end` with step `h`.
pub fn integrate(sys: &OdeSystem, method: RkMethod, h: f64) -> Result<FdmTrajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidOption(format!("step size must be positive, got {h}")));
    }
    let span = sys.t_end - sys.t0;
    let ratio = span / h;
    let mut n = ratio.round() as usize;
    let partial = (n as f64 * h - span).abs() > 1e-12 * span.max(1.0);
    if partial {
        n = ratio.floor() as usize;
    }
    let mut times = Vec::with_capacity(n + 2);
    let mut states = Vec::with_capacity(n + 2);
    times.push(sys.t0);
    states.push(sys.initial.clone());
    let mut grid: Vec<f64> = (1..=n).map(|i| sys.t0 + i as f64 * h).collect();
    if partial {
        grid.push(sys.t_end);
    } else if let Some(last) = grid.last_mut() {
        *last = sys.t_end;
    }
    for t_next in grid {
        let t = *times.last().unwrap();
        let y = states.last().unwrap();
        let next = step(sys, method, t, y, t_next - t);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { last_t: t });
        }
        times.push(t_next);
        states.push(next);
    }
    Ok(FdmTrajectory {
        times,
        states,
        partial_last_step: partial,
    })
}

pub fn rk3(sys: &OdeSystem, h: f64) -> Result<FdmTrajectory> {
    integrate(sys, RkMethod::Rk3, h)
}

pub fn rk4(sys: &OdeSystem, h: f64) -> Result<FdmTrajectory> {
    integrate(sys, RkMethod::Rk4, h)
}

impl FdmTrajectory {
    /// Trapezoidal L² norm of the error at the grid points.
    pub fn nodal_l2_error(&self, sys: &OdeSystem) -> Result<f64> {
        let errs = self.pointwise_errors(sys)?;
        let mut acc = 0.0;
        for i in 1..self.times.len() {
            let h = self.times[i] - self.times[i - 1];
            acc += 0.5 * h * (errs[i - 1].powi(2) + errs[i].powi(2));
        }
        Ok(acc.sqrt())
    }

    /// `max_i ‖y_i − y(t_i)‖`.
    pub fn max_nodal_error(&self, sys: &OdeSystem) -> Result<f64> {
        Ok(self.pointwise_errors(sys)?.into_iter().fold(0.0, f64::max))
    }

    /// Euclidean error at every grid point.
    pub fn pointwise_errors(&self, sys: &OdeSystem) -> Result<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, y)| {
                let e = sys.eval_exact(t).ok_or(Error::NoReference)?;
                Ok(y.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            })
            .collect()
    }

    /// Piecewise-linear interpolant of the trajectory.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.states[i - 1]
            .iter()
            .zip(&self.states[i])
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect()
    }

    /// L² error of the piecewise-linear interpolant measured with `plan`.
    pub fn interpolated_l2_error(&self, sys: &OdeSystem, plan: &QuadraturePlan) -> Result<f64> {
        let mut acc = 0.0;
        for (&t, &w) in plan.nodes.iter().zip(&plan.weights) {
            let e = sys.eval_exact(t).ok_or(Error::NoReference)?;
            let y = self.interpolate(t);
            acc += w * y.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(acc.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem;

    #[test]
    fn constant_solution() {
        let sys = OdeSystem::new("z", 0.0, 1.0, vec![2.0, -3.0], |_t, _y, o| {
            o[0] = 0.0;
            o[1] = 0.0;
        })
        .unwrap();
        for m in [RkMethod::Rk3, RkMethod::Rk4] {
            let tr = integrate(&sys, m, 0.1).unwrap();
            assert_eq!(tr.times.len(), 11);
            assert!(tr.states.iter().all(|s| s == &vec![2.0, -3.0]));
            assert!(!tr.partial_last_step);
        }
    }

    #[test]
    fn rk4_decay_accuracy() {
        let sys = problem::decay().unwrap();
        let tr = rk4(&sys, 0.1).unwrap();
        let err = (tr.states.last().unwrap()[0] - (-1f64).exp()).abs();
        assert!(err < 1e-6 && err > 1e-10, "{err}");
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn rk4_exact_for_cubic_quadrature() {
        let sys = OdeSystem::new("cubic", 0.0, 1.0, vec![0.0], |t, _y, o| {
            o[0] = 1.0 - 2.0 * t + 3.0 * t * t - 4.0 * t * t * t
        })
        .unwrap();
        let tr = rk4(&sys, 0.25).unwrap();
        for (t, y) in tr.times.iter().zip(&tr.states) {
            let exact = t - t * t + t * t * t - t * t * t * t;
            assert!((y[0] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_last_step_is_flagged() {
        let sys = problem::decay().unwrap();
        let tr = rk3(&sys, 0.3).unwrap();
        assert!(tr.partial_last_step);
        assert_eq!(tr.times.len(), 5);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = OdeSystem::new("blow", 0.0, 10.0, vec![1.0], |_t, y, o| o[0] = y[0] * y[0]).unwrap();
        assert!(matches!(rk4(&sys, 0.5), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn interpolation_is_piecewise_linear() {
        let tr = FdmTrajectory {
            times: vec![0.0, 1.0, 2.0],
            states: vec![vec![0.0], vec![2.0], vec![0.0]],
            partial_last_step: false,
        };
        assert_eq!(tr.interpolate(0.5), vec![1.0]);
        assert_eq!(tr.interpolate(1.5), vec![1.0]);
        assert_eq!(tr.interpolate(2.0), vec![0.0]);
    }
}
