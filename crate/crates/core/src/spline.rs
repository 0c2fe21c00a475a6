//! Clamped B-spline finite element spaces.
//!
//! A [`SplineSpace`] of degree `k` over breakpoints `τ₀ < … < τ_N` uses a knot
//! vector with `(k + 1)`-fold end knots and simple interior knots, giving
//! `m = N + k` basis functions with maximal `C^{k-1}` smoothness.

use crate::error::{Error, Result};
use crate::linalg::BandedMatrix;

/// Degree-`k` B-spline space over a strictly increasing breakpoint sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace {
    degree: usize,
    control_points: Vec<f64>,
    knots: Vec<f64>,
}

/// Values and first derivatives of every basis function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Half-open index range of the (at most `k + 1`) active functions.
    pub active_range: std::ops::Range<usize>,
}

/// The `k + 1` potentially nonzero basis functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    /// Global index of the first active function.
    pub first: usize,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl SplineSpace {
    /// Builds the clamped space of the given degree on `control_points`.
    pub fn new(degree: usize, control_points: &[f64]) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidDegree(degree));
        }
        if control_points.len() < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 control points, got {}",
                control_points.len()
            )));
        }
        if let Some(p) = control_points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("control point {p} is not finite")));
        }
        if let Some(w) = control_points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh(format!(
                "control points not strictly increasing at index {}: {} >= {}",
                w + 1,
                control_points[w],
                control_points[w + 1]
            )));
        }
        let t0 = control_points[0];
        let t_end = *control_points.last().unwrap();
        let mut knots = Vec::with_capacity(control_points.len() + 2 * degree);
        knots.extend(std::iter::repeat_n(t0, degree + 1));
        knots.extend_from_slice(&control_points[1..control_points.len() - 1]);
        knots.extend(std::iter::repeat_n(t_end, degree + 1));
        Ok(Self {
            degree,
            control_points: control_points.to_vec(),
            knots,
        })
    }

    /// `n_elements` equal elements on `[t0, t_end]`.
    pub fn uniform(degree: usize, t0: f64, t_end: f64, n_elements: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidMesh("need at least one element".into()));
        }
        let h = (t_end - t0) / n_elements as f64;
        let mut tau: Vec<f64> = (0..=n_elements).map(|i| t0 + i as f64 * h).collect();
        tau[n_elements] = t_end;
        Self::new(degree, &tau)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[f64] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions `m = N + k`.
    pub fn dim(&self) -> usize {
        self.control_points.len() - 1 + self.degree
    }

    pub fn n_elements(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.control_points[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.control_points.last().unwrap()
    }

    /// Largest element length.
    pub fn mesh_size(&self) -> f64 {
        self.control_points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Element containing `t`; elements are half-open except the last.
    pub fn element_of(&self, t: f64) -> Result<usize> {
        self.check_domain(t)?;
        let tau = &self.control_points;
        let n = tau.len() - 1;
        // first index with tau[i] > t, minus one
        let idx = tau.partition_point(|&v| v <= t);
        Ok(idx.saturating_sub(1).min(n - 1))
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= self.t0() && t <= self.t_end()) {
            return Err(Error::OutOfDomain {
                t,
                t0: self.t0(),
                t_end: self.t_end(),
            });
        }
        Ok(())
    }

    /// The `k + 1` active basis functions at `t` with their derivatives.
    pub fn eval_local(&self, t: f64) -> Result<LocalBasis> {
        let element = self.element_of(t)?;
        Ok(self.eval_in_element(element, t))
    }

    /// Like [`eval_local`](Self::eval_local) but with the element supplied,
    /// so that nodes on a breakpoint can be attributed explicitly.
    pub(crate) fn eval_in_element(&self, element: usize, t: f64) -> LocalBasis {
        let k = self.degree;
        let span = element + k;
        let u = &self.knots;
        let mut left = vec![0.0; k + 1];
        let mut right = vec![0.0; k + 1];
        let mut n = vec![0.0; k + 1];
        let mut lower = vec![0.0; k];
        n[0] = 1.0;
        for p in 1..=k {
            if p == k {
                lower.copy_from_slice(&n[..k]);
            }
            left[p] = t - u[span + 1 - p];
            right[p] = u[span + p] - t;
            let mut saved = 0.0;
            for r in 0..p {
                let tmp = n[r] / (right[r + 1] + left[p - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[p - r] * tmp;
            }
            n[p] = saved;
        }
        // N'_{i,k} = k (N_{i,k-1}/(u_{i+k}-u_i) - N_{i+1,k-1}/(u_{i+k+1}-u_{i+1}))
        let first = span - k;
        let kf = k as f64;
        let mut d = vec![0.0; k + 1];
        for (r, dr) in d.iter_mut().enumerate() {
            let i = first + r;
            let mut v = 0.0;
            if r >= 1 {
                let den = u[i + k] - u[i];
                if den > 0.0 {
                    v += lower[r - 1] / den;
                }
            }
            if r < k {
                let den = u[i + k + 1] - u[i + 1];
                if den > 0.0 {
                    v -= lower[r] / den;
                }
            }
            *dr = kf * v;
        }
        LocalBasis {
            first,
            values: n,
            derivatives: d,
        }
    }

    /// Values and derivatives of all `m` basis functions at `t`.
    pub fn eval(&self, t: f64) -> Result<BasisEval> {
        let local = self.eval_local(t)?;
        let m = self.dim();
        let mut values = vec![0.0; m];
        let mut derivatives = vec![0.0; m];
        let k1 = local.values.len();
        values[local.first..local.first + k1].copy_from_slice(&local.values);
        derivatives[local.first..local.first + k1].copy_from_slice(&local.derivatives);
        Ok(BasisEval {
            values,
            derivatives,
            active_range: local.first..local.first + k1,
        })
    }

    /// Greville abscissae: averages of `k` consecutive knots.
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let k = self.degree;
        let mut xi: Vec<f64> = (0..self.dim())
            .map(|i| self.knots[i + 1..=i + k].iter().sum::<f64>() / k as f64)
            .collect();
        // pin the ends against rounding in the sums
        xi[0] = self.t0();
        *xi.last_mut().unwrap() = self.t_end();
        xi
    }

    /// Interpolates a `dim`-valued function at the Greville abscissae.
    ///
    /// Returns coefficients in basis-major layout (`x[i * dim + c]`). For
    /// `k = 1` this is the nodal interpolant at the breakpoints.
    pub fn interpolate<F>(&self, dim: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let m = self.dim();
        let k = self.degree;
        let xi = self.greville_abscissae();
        let mut rhs = vec![vec![0.0; m]; dim];
        for (j, &t) in xi.iter().enumerate() {
            let v = f(t);
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: v.len(),
                });
            }
            for c in 0..dim {
                rhs[c][j] = v[c];
            }
        }
        let mut a = BandedMatrix::zeros(m, k, k);
        for (j, &t) in xi.iter().enumerate() {
            let local = self.eval_local(t)?;
            for (r, &v) in local.values.iter().enumerate() {
                a.set(j, local.first + r, v);
            }
        }
        a.solve_many(&mut rhs).ok_or(Error::InterpolationFailure)?;
        let mut x = vec![0.0; m * dim];
        for i in 0..m {
            for c in 0..dim {
                x[i * dim + c] = rhs[c][i];
            }
        }
        Ok(x)
    }

    /// Evaluates the spline with coefficients `x` (basis-major, `dim` states)
    /// and its derivative at `t`.
    pub fn eval_function(&self, dim: usize, x: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim() * dim {
            return Err(Error::Dimension {
                expected: self.dim() * dim,
                found: x.len(),
            });
        }
        let local = self.eval_local(t)?;
        let mut y = vec![0.0; dim];
        let mut dy = vec![0.0; dim];
        for (r, (&v, &dv)) in local.values.iter().zip(&local.derivatives).enumerate() {
            let block = &x[(local.first + r) * dim..(local.first + r + 1) * dim];
            for c in 0..dim {
                y[c] += v * block[c];
                dy[c] += dv * block[c];
            }
        }
        Ok((y, dy))
    }

    /// Same degree, with the extra breakpoints merged in.
    pub fn with_inserted(&self, new_points: &[f64]) -> Result<Self> {
        let mut tau = self.control_points.clone();
        tau.extend_from_slice(new_points);
        tau.sort_by(f64::total_cmp);
        tau.dedup();
        Self::new(self.degree, &tau)
    }
}
