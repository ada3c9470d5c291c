use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Square operator acting on `f64` vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    fn diagonal(&self) -> Vec<f64>;
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// General tridiagonal matrix. `lower[i]` is entry `(i+1, i)`, `upper[i]` is
/// entry `(i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let off = diag.len().saturating_sub(1);
        check_len(off, lower.len())?;
        check_len(off, upper.len())?;
        Ok(Tridiagonal { lower, diag, upper })
    }

    pub fn symmetric(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        Tridiagonal::new(off.clone(), diag, off)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Direct `L D Lᵀ` solve of a symmetric positive-definite tridiagonal system.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_len(n, b.len())?;
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut x = b.to_vec();
        for i in 0..n {
            d[i] = self.diag[i];
            if i > 0 {
                d[i] -= l[i - 1] * self.upper[i - 1];
                x[i] -= l[i - 1] * x[i - 1];
            }
            if !(d[i] > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            if i + 1 < n {
                l[i] = self.lower[i] / d[i];
            }
        }
        for i in (0..n).rev() {
            x[i] /= d[i];
            if i + 1 < n {
                let next = x[i + 1];
                x[i] -= l[i] * next;
            }
        }
        Ok(x)
    }
}

impl LinearOperator for Tridiagonal {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }
}

/// Square matrix in one of the storage layouts produced by assembly.
#[derive(Debug, Clone, PartialEq)]
pub enum SymMatrix {
    Tridiagonal(Tridiagonal),
    Dense(DMatrix<f64>),
}

impl SymMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SymMatrix::Tridiagonal(t) => t.dim(),
            SymMatrix::Dense(d) => d.nrows(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            SymMatrix::Tridiagonal(t) => {
                if i == j {
                    t.diag[i]
                } else if i == j + 1 {
                    t.lower[j]
                } else if j == i + 1 {
                    t.upper[i]
                } else {
                    0.0
                }
            }
            SymMatrix::Dense(d) => d[(i, j)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(d) => d.clone(),
            SymMatrix::Tridiagonal(_) => {
                let n = self.dim();
                DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
            }
        }
    }

    /// Nonzero entries as `(row, col, value)`, sorted by row then column.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            let cols = match self {
                SymMatrix::Tridiagonal(_) => i.saturating_sub(1)..(i + 2).min(n),
                SymMatrix::Dense(_) => 0..n,
            };
            for j in cols {
                let v = self.entry(i, j);
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let (defect, scale) = match self {
            SymMatrix::Tridiagonal(t) => {
                let defect = t
                    .lower
                    .iter()
                    .zip(&t.upper)
                    .map(|(l, u)| (l - u).abs())
                    .fold(0.0, f64::max);
                let scale = t
                    .diag
                    .iter()
                    .chain(&t.lower)
                    .chain(&t.upper)
                    .map(|v| v.abs())
                    .fold(0.0, f64::max);
                (defect, scale)
            }
            SymMatrix::Dense(d) => {
                let n = d.nrows();
                let mut defect: f64 = 0.0;
                for i in 0..n {
                    for j in 0..i {
                        defect = defect.max((d[(i, j)] - d[(j, i)]).abs());
                    }
                }
                (defect, d.amax())
            }
        };
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        let defect = self.symmetry_defect();
        if defect <= tol {
            Ok(())
        } else {
            Err(Error::NotSymmetric { defect })
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// `a * A + b * B`, tridiagonal when both operands are.
    pub fn linear_combination(a: f64, lhs: &SymMatrix, b: f64, rhs: &SymMatrix) -> Result<SymMatrix> {
        check_len(lhs.dim(), rhs.dim())?;
        let combine = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(u, v)| a * u + b * v).collect()
        };
        Ok(match (lhs, rhs) {
            (SymMatrix::Tridiagonal(l), SymMatrix::Tridiagonal(r)) => {
                SymMatrix::Tridiagonal(Tridiagonal {
                    lower: combine(&l.lower, &r.lower),
                    diag: combine(&l.diag, &r.diag),
                    upper: combine(&l.upper, &r.upper),
                })
            }
            _ => SymMatrix::Dense(lhs.to_dense() * a + rhs.to_dense() * b),
        })
    }

    /// Adds `delta` to a single stored entry. Used to inject faults in the
    /// verification suites.
    pub fn add_to_entry(&mut self, i: usize, j: usize, delta: f64) {
        match self {
            SymMatrix::Tridiagonal(t) => {
                if i == j {
                    t.diag[i] += delta;
                } else if i == j + 1 {
                    t.lower[j] += delta;
                } else if j == i + 1 {
                    t.upper[i] += delta;
                } else {
                    panic!("entry ({i}, {j}) is outside the tridiagonal band");
                }
            }
            SymMatrix::Dense(d) => d[(i, j)] += delta,
        }
    }
}

impl LinearOperator for SymMatrix {
    fn dim(&self) -> usize {
        SymMatrix::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            SymMatrix::Tridiagonal(t) => t.apply_into(x, y),
            SymMatrix::Dense(d) => {
                let n = d.nrows();
                for (i, yi) in y.iter_mut().enumerate().take(n) {
                    *yi = (0..n).map(|j| d[(i, j)] * x[j]).sum();
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        match self {
            SymMatrix::Tridiagonal(t) => t.diag.clone(),
            SymMatrix::Dense(d) => d.diagonal().iter().copied().collect(),
        }
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = (0..n).map(|j| self[(i, j)] * x[j]).sum();
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diagonal().iter().copied().collect()
    }
}
