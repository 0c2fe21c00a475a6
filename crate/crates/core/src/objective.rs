//! The discrete least-squares objective
//!
//! ```text
//! J(x) = ½ Σ_j s_j² ‖y'(t_j; x) − G(t_j, y(t_j; x))‖² + ½ ‖y(t0; x) − g‖²
//! ```
//!
//! over the nodes of a [`QuadraturePlan`], where `s_j = √w_j` under
//! [`Weighting::L2`] (quadrature approximation of the L² residual norm) and
//! `s_j = 1` under [`Weighting::Plain`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::BandedSym;
use crate::problem::OdeSystem;
use crate::quadrature::QuadraturePlan;
use crate::spline::{LocalBasis, SplineSpace};

/// Finite element coefficients, basis-major: `[x_1^1..x_1^d, x_2^1.., ..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    data: Vec<f64>,
    state_dim: usize,
}

impl CoefficientVector {
    pub fn new(data: Vec<f64>, state_dim: usize) -> Result<Self> {
        if state_dim == 0 || data.len() % state_dim != 0 {
            return Err(Error::InvalidOption(format!(
                "{} coefficients do not split into blocks of {state_dim}",
                data.len()
            )));
        }
        Ok(Self { data, state_dim })
    }

    pub fn zeros(n_basis: usize, state_dim: usize) -> Self {
        Self {
            data: vec![0.0; n_basis * state_dim],
            state_dim,
        }
    }

    /// Every block equal to `value`.
    pub fn constant(n_basis: usize, value: &[f64]) -> Self {
        Self {
            data: value.repeat(n_basis),
            state_dim: value.len(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_basis(&self) -> usize {
        self.data.len() / self.state_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Coefficient block of basis function `i`.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How node residuals are scaled in the stacked residual vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Scale by `√w_j`, so `‖r‖²` is the quadrature L² norm.
    #[default]
    L2,
    /// Unit scaling over the nodes.
    Plain,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Self::L2),
            "plain" => Ok(Self::Plain),
            other => Err(Error::InvalidOption(format!(
                "weighting must be 'l2' or 'plain', got '{other}'"
            ))),
        }
    }
}

/// Stacked residual split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBundle {
    /// `s_j (y'(t_j) − G(t_j, y(t_j)))`, node-major.
    pub ode_residual: Vec<f64>,
    /// `y(t0) − g`.
    pub ic_residual: Vec<f64>,
    /// `√(Σ_{j ∈ e} w_j ‖r_j‖²)` per element, unscaled residual.
    pub per_element_norms: Vec<f64>,
}

impl ResidualBundle {
    pub fn objective(&self) -> f64 {
        0.5 * (norm_sq(&self.ode_residual) + norm_sq(&self.ic_residual))
    }

    /// `[ode_residual; ic_residual]`, the row order of the Jacobian.
    pub fn stacked(&self) -> Vec<f64> {
        let mut r = self.ode_residual.clone();
        r.extend_from_slice(&self.ic_residual);
        r
    }

    pub fn worst_element(&self) -> f64 {
        self.per_element_norms.iter().cloned().fold(0.0, f64::max)
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Row-sparse matrix where every row's nonzeros lie in one contiguous
/// column window of fixed width.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    rows: usize,
    cols: usize,
    width: usize,
    starts: Vec<usize>,
    values: Vec<f64>,
}

impl SparseJacobian {
    fn new(rows: usize, cols: usize, width: usize) -> Self {
        Self {
            rows,
            cols,
            width,
            starts: vec![0; rows],
            values: vec![0.0; rows * width],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Column window start and values of one row.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.values[i * self.width..(i + 1) * self.width])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, v) = self.row(i);
        if j >= s && j < s + self.width {
            v[j - s]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (s, v) = self.row(i);
            for (c, &val) in v.iter().enumerate() {
                if s + c < self.cols {
                    m[(i, s + c)] += val;
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let (s, v) = self.row(i);
                v.iter()
                    .enumerate()
                    .filter(|(c, _)| s + c < self.cols)
                    .map(|(c, a)| a * x[s + c])
                    .sum()
            })
            .collect()
    }

    /// `Jᵀ r`.
    pub fn transpose_mul(&self, r: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate().take(self.rows) {
            let (s, v) = self.row(i);
            for (c, a) in v.iter().enumerate() {
                if s + c < self.cols {
                    g[s + c] += a * ri;
                }
            }
        }
        g
    }

    /// `JᵀJ` in band storage.
    pub fn normal_matrix(&self) -> BandedSym {
        let mut n = BandedSym::zeros(self.cols, self.width.saturating_sub(1));
        for i in 0..self.rows {
            let (s, v) = self.row(i);
            for a in 0..self.width {
                if v[a] == 0.0 || s + a >= self.cols {
                    continue;
                }
                for b in 0..=a {
                    if s + b < self.cols {
                        n.add(s + a, s + b, v[a] * v[b]);
                    }
                }
            }
        }
        n
    }
}

/// A spline space paired with a quadrature plan, with basis values cached
/// at every node.
#[derive(Debug, Clone)]
pub struct Discretization {
    space: SplineSpace,
    plan: QuadraturePlan,
    weighting: Weighting,
    nodes: Vec<LocalBasis>,
    scales: Vec<f64>,
    initial: LocalBasis,
}

impl Discretization {
    pub fn new(space: SplineSpace, plan: QuadraturePlan, weighting: Weighting) -> Self {
        let nodes: Vec<LocalBasis> = plan
            .nodes
            .iter()
            .zip(&plan.element_of_node)
            .map(|(&t, &e)| space.eval_in_element(e, t))
            .collect();
        let scales = plan
            .weights
            .iter()
            .map(|&w| match weighting {
                Weighting::L2 => w.sqrt(),
                Weighting::Plain => 1.0,
            })
            .collect();
        let initial = space.eval_in_element(0, space.t0());
        Self {
            space,
            plan,
            weighting,
            nodes,
            scales,
            initial,
        }
    }

    /// Space plus a plan with `points_per_element` Gauss points.
    pub fn build(space: SplineSpace, points_per_element: usize, weighting: Weighting) -> Result<Self> {
        let plan = QuadraturePlan::new(&space, points_per_element)?;
        Ok(Self::new(space, plan, weighting))
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn plan(&self) -> &QuadraturePlan {
        &self.plan
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    /// Residual scale `s_j` at node `j`.
    pub fn node_scale(&self, j: usize) -> f64 {
        self.scales[j]
    }

    pub fn n_unknowns(&self, sys: &OdeSystem) -> usize {
        self.space.dim() * sys.dim
    }

    fn check(&self, sys: &OdeSystem, x: &CoefficientVector) -> Result<()> {
        let expected = self.n_unknowns(sys);
        if x.len() != expected || x.state_dim() != sys.dim {
            return Err(Error::Dimension {
                expected,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn combine(basis: &LocalBasis, x: &CoefficientVector, y: &mut [f64], dy: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        dy.iter_mut().for_each(|v| *v = 0.0);
        for (r, (&v, &dv)) in basis.values.iter().zip(&basis.derivatives).enumerate() {
            let block = x.block(basis.first + r);
            for c in 0..y.len() {
                y[c] += v * block[c];
                dy[c] += dv * block[c];
            }
        }
    }

    pub fn residual(&self, sys: &OdeSystem, x: &CoefficientVector) -> Result<ResidualBundle> {
        self.check(sys, x)?;
        let d = sys.dim;
        let n = self.plan.len();
        let mut ode = vec![0.0; n * d];
        let mut elem_sq = vec![0.0; self.space.n_elements()];
        let mut y = vec![0.0; d];
        let mut dy = vec![0.0; d];
        let mut g = vec![0.0; d];
        for j in 0..n {
            let t = self.plan.nodes[j];
            Self::combine(&self.nodes[j], x, &mut y, &mut dy);
            (sys.rhs)(t, &y, &mut g);
            let mut sq = 0.0;
            for c in 0..d {
                let r = dy[c] - g[c];
                if !r.is_finite() {
                    return Err(Error::NonfiniteResidual { node: j, t });
                }
                sq += r * r;
                ode[j * d + c] = self.scales[j] * r;
            }
            elem_sq[self.plan.element_of_node[j]] += self.plan.weights[j] * sq;
        }
        Self::combine(&self.initial, x, &mut y, &mut dy);
        let ic: Vec<f64> = y.iter().zip(&sys.initial).map(|(a, b)| a - b).collect();
        if ic.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonfiniteResidual {
                node: n,
                t: self.space.t0(),
            });
        }
        Ok(ResidualBundle {
            ode_residual: ode,
            ic_residual: ic,
            per_element_norms: elem_sq.into_iter().map(f64::sqrt).collect(),
        })
    }

    pub fn objective(&self, sys: &OdeSystem, x: &CoefficientVector) -> Result<f64> {
        Ok(self.residual(sys, x)?.objective())
    }

    /// Jacobian of the stacked residual `[ode_residual; ic_residual]` with
    /// respect to `x`. Row block `j`:
    /// `s_j (φ'(t_j)ᵀ ⊗ I − ∂G/∂y · (φ(t_j)ᵀ ⊗ I))`; last `d` rows `φ(t0)ᵀ ⊗ I`.
    pub fn residual_jacobian(&self, sys: &OdeSystem, x: &CoefficientVector) -> Result<SparseJacobian> {
        self.check(sys, x)?;
        let d = sys.dim;
        let k1 = self.space.degree() + 1;
        let width = k1 * d;
        let n = self.plan.len();
        let mut jac = SparseJacobian::new(n * d + d, self.n_unknowns(sys), width);
        let mut y = vec![0.0; d];
        let mut dy = vec![0.0; d];
        let mut gy = vec![0.0; d * d];
        for j in 0..n {
            let t = self.plan.nodes[j];
            let basis = &self.nodes[j];
            Self::combine(basis, x, &mut y, &mut dy);
            sys.eval_jacobian(t, &y, &mut gy);
            if gy.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonfiniteResidual { node: j, t });
            }
            let s = self.scales[j];
            for c in 0..d {
                let row = j * d + c;
                jac.starts[row] = basis.first * d;
                let vals = &mut jac.values[row * width..(row + 1) * width];
                for r in 0..k1 {
                    let (phi, dphi) = (basis.values[r], basis.derivatives[r]);
                    for cc in 0..d {
                        let mut v = -gy[c * d + cc] * phi;
                        if cc == c {
                            v += dphi;
                        }
                        vals[r * d + cc] = s * v;
                    }
                }
            }
        }
        for c in 0..d {
            let row = n * d + c;
            jac.starts[row] = self.initial.first * d;
            let vals = &mut jac.values[row * width..(row + 1) * width];
            for r in 0..k1 {
                vals[r * d + c] = self.initial.values[r];
            }
        }
        Ok(jac)
    }

    /// `∇J = Jᵀ r`.
    pub fn gradient(&self, sys: &OdeSystem, x: &CoefficientVector) -> Result<Vec<f64>> {
        let r = self.residual(sys, x)?;
        let j = self.residual_jacobian(sys, x)?;
        Ok(j.transpose_mul(&r.stacked()))
    }
}

/// `y^h(t)` and `(y^h)'(t)` for coefficients `x`.
pub fn eval_solution(space: &SplineSpace, x: &CoefficientVector, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    space.eval_function(x.state_dim(), x.as_slice(), t)
}
