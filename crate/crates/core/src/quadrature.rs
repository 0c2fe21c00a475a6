//! Composite Gauss–Legendre rules over spline elements.

use crate::error::{Error, Result};
use crate::spline::SplineSpace;

pub const MAX_ORDER: usize = 64;

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
///
/// Nodes are roots of `P_n` found by Newton iteration from Chebyshev
/// initial guesses.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::UnsupportedOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
    (pn, dp)
}

/// Composite rule: `points_per_element` Gauss nodes mapped into every element.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePlan {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub points_per_element: usize,
    pub element_of_node: Vec<usize>,
}

impl QuadraturePlan {
    pub fn new(space: &SplineSpace, points_per_element: usize) -> Result<Self> {
        let (xr, wr) = gauss_legendre(points_per_element)?;
        let tau = space.control_points();
        let ne = tau.len() - 1;
        let total = ne * points_per_element;
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut element_of_node = Vec::with_capacity(total);
        for (e, w) in tau.windows(2).enumerate() {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            for (x, wt) in xr.iter().zip(&wr) {
                nodes.push(mid + half * x);
                weights.push(half * wt);
                element_of_node.push(e);
            }
        }
        Ok(Self {
            nodes,
            weights,
            points_per_element,
            element_of_node,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.element_of_node.last().map_or(0, |e| e + 1)
    }

    /// `Σ w_j f(t_j)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}
