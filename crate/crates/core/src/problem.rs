//! Initial value problems `y' = G(t, y)`, `y(t0) = g`, and the built-in test set.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `G(t, y)` written into the output slice.
pub type RhsFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `∂G/∂y` at `(t, y)`, row-major `d × d`.
pub type JacobianFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// A time-only function written into the output slice.
pub type TimeFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// `G(t, y) = A(t) y + b(t)`, with `A` row-major.
#[derive(Clone)]
pub struct LinearPart {
    pub a: TimeFn,
    pub b: TimeFn,
}

/// An ODE system with optional Jacobian, exact solution and linear structure.
#[derive(Clone)]
pub struct OdeSystem {
    pub name: String,
    pub dim: usize,
    pub t0: f64,
    pub t_end: f64,
    pub initial: Vec<f64>,
    pub rhs: RhsFn,
    pub jacobian: Option<JacobianFn>,
    pub exact: Option<TimeFn>,
    pub linear: Option<LinearPart>,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("initial", &self.initial)
            .field("jacobian", &self.jacobian.is_some())
            .field("exact", &self.exact.is_some())
            .field("linear", &self.linear.is_some())
            .finish()
    }
}

impl OdeSystem {
    pub fn new<F>(name: &str, t0: f64, t_end: f64, initial: Vec<f64>, rhs: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if initial.is_empty() {
            return Err(Error::InvalidOption("system dimension must be at least 1".into()));
        }
        if !(t0 < t_end) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidMesh(format!(
                "time interval [{t0}, {t_end}] is empty"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            dim: initial.len(),
            t0,
            t_end,
            initial,
            rhs: Arc::new(rhs),
            jacobian: None,
            exact: None,
            linear: None,
        })
    }

    /// Linear system `y' = A(t) y + b(t)`; the right-hand side and Jacobian
    /// are derived from `A` and `b`.
    pub fn linear<A, B>(name: &str, t0: f64, t_end: f64, initial: Vec<f64>, a: A, b: B) -> Result<Self>
    where
        A: Fn(f64, &mut [f64]) + Send + Sync + 'static,
        B: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        let d = initial.len();
        let a: TimeFn = Arc::new(a);
        let b: TimeFn = Arc::new(b);
        let (ar, br) = (a.clone(), b.clone());
        let mut sys = Self::new(name, t0, t_end, initial, move |t, y, out| {
            let mut am = vec![0.0; d * d];
            ar(t, &mut am);
            br(t, out);
            for i in 0..d {
                for j in 0..d {
                    out[i] += am[i * d + j] * y[j];
                }
            }
        })?;
        let aj = a.clone();
        sys.jacobian = Some(Arc::new(move |t, _y, out| aj(t, out)));
        sys.linear = Some(LinearPart { a, b });
        Ok(sys)
    }

    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_exact<F>(mut self, exact: F) -> Self
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn eval_rhs(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.rhs)(t, y, &mut out);
        out
    }

    pub fn eval_exact(&self, t: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|e| {
            let mut out = vec![0.0; self.dim];
            e(t, &mut out);
            out
        })
    }

    /// `∂G/∂y`, falling back to forward differences with step
    /// `√ε (1 + |y_j|)` when no analytic Jacobian is attached.
    pub fn eval_jacobian(&self, t: f64, y: &[f64], out: &mut [f64]) {
        if let Some(j) = &self.jacobian {
            j(t, y, out);
            return;
        }
        let d = self.dim;
        let f0 = self.eval_rhs(t, y);
        let mut yp = y.to_vec();
        let mut f1 = vec![0.0; d];
        for j in 0..d {
            let h = f64::EPSILON.sqrt() * (1.0 + y[j].abs());
            yp[j] = y[j] + h;
            (self.rhs)(t, &yp, &mut f1);
            for i in 0..d {
                out[i * d + j] = (f1[i] - f0[i]) / h;
            }
            yp[j] = y[j];
        }
    }

    pub fn is_linear(&self) -> bool {
        self.linear.is_some()
    }

    /// Appends a clock `p' = 1`, `p(t0) = t0`, giving the autonomous system
    /// in `z = (p, y)`.
    pub fn autonomize(&self) -> OdeSystem {
        let d = self.dim;
        let inner = self.clone();
        let mut initial = Vec::with_capacity(d + 1);
        initial.push(self.t0);
        initial.extend_from_slice(&self.initial);
        let rhs_sys = inner.clone();
        let mut out = OdeSystem {
            name: format!("{}+clock", self.name),
            dim: d + 1,
            t0: self.t0,
            t_end: self.t_end,
            initial,
            rhs: Arc::new(move |_t, z, out| {
                out[0] = 1.0;
                (rhs_sys.rhs)(z[0], &z[1..], &mut out[1..]);
            }),
            jacobian: None,
            exact: None,
            linear: None,
        };
        if self.jacobian.is_some() {
            let jac_sys = inner.clone();
            out.jacobian = Some(Arc::new(move |_t, z, out| {
                let n = d + 1;
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut inner_jac = vec![0.0; d * d];
                jac_sys.eval_jacobian(z[0], &z[1..], &mut inner_jac);
                for i in 0..d {
                    for j in 0..d {
                        out[(i + 1) * n + j + 1] = inner_jac[i * d + j];
                    }
                }
                // ∂G/∂t by central differences in the clock column
                let h = f64::EPSILON.cbrt() * (1.0 + z[0].abs());
                let fp = jac_sys.eval_rhs(z[0] + h, &z[1..]);
                let fm = jac_sys.eval_rhs(z[0] - h, &z[1..]);
                for i in 0..d {
                    out[(i + 1) * n] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }));
        }
        if let Some(ex) = &self.exact {
            let ex = ex.clone();
            out.exact = Some(Arc::new(move |t, out| {
                out[0] = t;
                ex(t, &mut out[1..]);
            }));
        }
        out
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["fig1", "decay", "logistic", "michaelis_menten"];

pub const DEFAULT_KM: f64 = 0.005;

/// Looks up a built-in problem. `michaelis_menten` uses `K_m = 0.005`;
/// see [`michaelis_menten`] for other values.
pub fn builtin(name: &str) -> Result<OdeSystem> {
    match name {
        "fig1" => fig1(),
        "decay" => decay(),
        "logistic" => logistic(),
        "michaelis_menten" => michaelis_menten(DEFAULT_KM),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `y' = y - 2e^{-t}`, `y(0) = 1` on `[0, 30]`; exact `e^{-t}`.
///
/// The growing mode `e^t` amplifies any perturbation, which makes this a
/// hard case for forward time stepping.
pub fn fig1() -> Result<OdeSystem> {
    Ok(OdeSystem::linear(
        "fig1",
        0.0,
        30.0,
        vec![1.0],
        |_t, a| a[0] = 1.0,
        |t, b| b[0] = -2.0 * (-t).exp(),
    )?
    .with_exact(|t, y| y[0] = (-t).exp()))
}

/// `y' = -y`, `y(0) = 1` on `[0, 1]`.
pub fn decay() -> Result<OdeSystem> {
    Ok(OdeSystem::linear(
        "decay",
        0.0,
        1.0,
        vec![1.0],
        |_t, a| a[0] = -1.0,
        |_t, b| b[0] = 0.0,
    )?
    .with_exact(|t, y| y[0] = (-t).exp()))
}

/// `y' = y (1 - y)`, `y(0) = 0.1` on `[0, 10]`; exact `1 / (1 + 9 e^{-t})`.
pub fn logistic() -> Result<OdeSystem> {
    Ok(
        OdeSystem::new("logistic", 0.0, 10.0, vec![0.1], |_t, y, out| {
            out[0] = y[0] * (1.0 - y[0])
        })?
        .with_jacobian(|_t, y, out| out[0] = 1.0 - 2.0 * y[0])
        .with_exact(|t, y| y[0] = 1.0 / (1.0 + 9.0 * (-t).exp())),
    )
}

/// `y' = -y / (K_m + y)`, `y(0) = 1` on `[0, 3]`. The exact solution solves
/// `y + K_m ln y = 1 - t`.
pub fn michaelis_menten(km: f64) -> Result<OdeSystem> {
    if !(km > 0.0) {
        return Err(Error::InvalidOption(format!("K_m must be positive, got {km}")));
    }
    Ok(OdeSystem::new(
        "michaelis_menten",
        0.0,
        3.0,
        vec![1.0],
        move |_t, y, out| out[0] = -y[0] / (km + y[0]),
    )?
    .with_jacobian(move |_t, y, out| {
        let s = km + y[0];
        out[0] = -km / (s * s);
    })
    .with_exact(move |t, y| y[0] = michaelis_menten_exact(km, t)))
}

/// Root of `y + K_m ln y = 1 - t` on `(1e-300, ∞)`.
///
/// Newton on `u = ln y`, where the equation `e^u + K_m u = c` is increasing
/// and convex, safeguarded by bisection on `[ln 1e-300, u_hi]`.
pub fn michaelis_menten_exact(km: f64, t: f64) -> f64 {
    let c = 1.0 - t;
    let f = |u: f64| u.exp() + km * u - c;
    let mut lo = 1e-300f64.ln();
    if f(lo) >= 0.0 {
        return 1e-300;
    }
    let mut hi = 0.0f64;
    while f(hi) < 0.0 {
        hi += 1.0;
    }
    // start from the branch that dominates: y ≈ c when c is not small,
    // ln y ≈ c / K_m when it is
    let mut u = if c > km { c.ln() } else { (c / km).max(lo) };
    if !(u > lo && u < hi) {
        u = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let fu = f(u);
        if fu == 0.0 {
            break;
        }
        if fu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let step = fu / (u.exp() + km);
        let mut next = u - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * (1.0 + u.abs()) {
            u = next;
            break;
        }
        u = next;
    }
    u.exp()
}
