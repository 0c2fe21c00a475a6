//! Banded matrix storage and direct solvers.
//!
//! Normal matrices assembled from B-spline bases are banded with half
//! bandwidth `(k + 1) * d - 1`, so everything here works on compact band
//! storage. A dense partial-pivoting LU (nalgebra) is kept as a fallback
//! for systems where the band Cholesky breaks down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot-ratio condition estimate above which the Cholesky result is
/// re-solved by dense LU.
pub const CONDITION_LIMIT: f64 = 1e14;

/// Largest system handed to the dense LU fallback.
pub const DENSE_FALLBACK_LIMIT: usize = 6000;

/// Symmetric matrix holding only its lower band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i, left padded with zeros
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            None
        } else {
            Some(i * (self.bw + 1) + (j + self.bw - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    ///
    /// Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bw));
        self.data[s] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// In-place band Cholesky `A = L Lᵀ`.
    pub fn cholesky(&self) -> Option<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.clone();
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = l.get(j, j);
            for p in lo..j {
                let v = l.get(j, p);
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            let s = l.slot(j, j).unwrap();
            l.data[s] = djj;
            let hi = (j + bw).min(n - 1);
            for i in j + 1..=hi {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut v = l.get(i, j);
                for p in lo_i..j {
                    v -= l.get(i, p) * l.get(j, p);
                }
                let s = l.slot(i, j).unwrap();
                l.data[s] = v / djj;
            }
        }
        Some(BandCholesky { factor: l })
    }
}

/// Lower factor of a band Cholesky decomposition.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: BandedSym,
}

impl BandCholesky {
    /// `(max pivot / min pivot)²`, a cheap lower bound on the 2-norm condition.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.factor.diagonal();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }

    pub fn smallest_pivot(&self) -> f64 {
        self.factor
            .diagonal()
            .iter()
            .map(|v| v * v)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.factor;
        let n = l.n;
        let bw = l.bw;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut v = y[i];
            for p in lo..i {
                v -= l.get(i, p) * y[p];
            }
            y[i] = v / l.get(i, i);
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut v = y[i];
            for p in i + 1..=hi {
                v -= l.get(p, i) * y[p];
            }
            y[i] = v / l.get(i, i);
        }
        y
    }
}

/// Outcome of [`solve_spd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdSolveInfo {
    pub condition_estimate: f64,
    pub used_dense_fallback: bool,
}

/// Solves a symmetric positive (semi)definite banded system.
///
/// Band Cholesky first; if it breaks down or its pivot-ratio estimate exceeds
/// [`CONDITION_LIMIT`], the system is re-solved with dense partial-pivoting LU.
pub fn solve_spd(a: &BandedSym, b: &[f64]) -> Result<(Vec<f64>, SpdSolveInfo)> {
    assert_eq!(a.size(), b.len());
    let chol = a.cholesky();
    if let Some(c) = &chol {
        let cond = c.condition_estimate();
        if cond <= CONDITION_LIMIT {
            let x = c.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((
                    x,
                    SpdSolveInfo {
                        condition_estimate: cond,
                        used_dense_fallback: false,
                    },
                ));
            }
        }
    }
    if a.size() > DENSE_FALLBACK_LIMIT {
        let pivot = chol.map_or(0.0, |c| c.smallest_pivot());
        return Err(Error::SingularSystem { pivot });
    }
    let (x, cond) = dense_lu_solve(a.to_dense(), b)?;
    Ok((
        x,
        SpdSolveInfo {
            condition_estimate: cond,
            used_dense_fallback: true,
        },
    ))
}

/// Dense LU with partial pivoting; the condition estimate is the ratio of
/// extreme `U` pivots.
pub fn dense_lu_solve(a: DMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.nrows();
    let scale = a.amax();
    let lu = a.lu();
    let u = lu.u();
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for i in 0..n {
        let p = u[(i, i)].abs();
        min = min.min(p);
        max = max.max(p);
    }
    if !(min > scale * f64::EPSILON * n as f64) || !min.is_finite() {
        return Err(Error::SingularSystem { pivot: min });
    }
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or(Error::SingularSystem { pivot: min })?;
    Ok((x.as_slice().to_vec(), max / min))
}

/// General band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = v;
    }

    /// Solves `A X = B` for several right-hand sides by band LU without
    /// pivoting. Returns `None` on a vanishing pivot.
    ///
    /// Only safe for matrices where elimination without pivoting is stable,
    /// such as totally positive B-spline collocation matrices.
    pub fn solve_many(&self, rhs: &mut [Vec<f64>]) -> Option<()> {
        let n = self.n;
        let mut a = self.clone();
        for k in 0..n {
            let piv = a.get(k, k);
            if piv.abs() < f64::MIN_POSITIVE || !piv.is_finite() {
                return None;
            }
            let hi = (k + self.kl).min(n - 1);
            let hj = (k + self.ku).min(n - 1);
            for i in k + 1..=hi {
                let f = a.get(i, k) / piv;
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..=hj {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
                for col in rhs.iter_mut() {
                    col[i] -= f * col[k];
                }
            }
        }
        for col in rhs.iter_mut() {
            for i in (0..n).rev() {
                let hj = (i + self.ku).min(n - 1);
                let mut v = col[i];
                for j in i + 1..=hj {
                    v -= a.get(i, j) * col[j];
                }
                col[i] = v / a.get(i, i);
            }
        }
        Some(())
    }
}
