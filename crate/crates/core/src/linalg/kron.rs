//! The Kronecker-sum energy operator `K = A_x ⊗ M_y + M_x ⊗ A_y`.
//!
//! Coefficient tensors are `n_x × n_y` matrices `U`; their vectorization is
//! row-major (`vec(U)[i * n_y + j] = U[(i, j)]`), so that
//! `K vec(U) = vec(A_x U M_y + M_x U A_y)`.

use nalgebra::DMatrix;

use super::matrix::{dot, LinearOperator};
use super::solver::{Preconditioner, SpdSolver};
use crate::error::{check_len, Error, Result};

/// Largest `n_x * n_y` for which [`KroneckerSumOperator::to_dense`] will
/// materialize the operator.
pub const DENSE_KRONECKER_LIMIT: usize = 4096;

#[derive(Clone, Copy)]
pub struct KroneckerSumOperator<'a> {
    pub a_x: &'a dyn LinearOperator,
    pub m_x: &'a dyn LinearOperator,
    pub a_y: &'a dyn LinearOperator,
    pub m_y: &'a dyn LinearOperator,
}

impl<'a> KroneckerSumOperator<'a> {
    pub fn new(
        a_x: &'a dyn LinearOperator,
        m_x: &'a dyn LinearOperator,
        a_y: &'a dyn LinearOperator,
        m_y: &'a dyn LinearOperator,
    ) -> Result<Self> {
        check_len(a_x.dim(), m_x.dim())?;
        check_len(a_y.dim(), m_y.dim())?;
        Ok(KroneckerSumOperator { a_x, m_x, a_y, m_y })
    }

    pub fn nx(&self) -> usize {
        self.a_x.dim()
    }

    pub fn ny(&self) -> usize {
        self.a_y.dim()
    }

    /// Explicit `(n_x n_y)²` matrix; refused above [`DENSE_KRONECKER_LIMIT`].
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.nx() * self.ny();
        if n > DENSE_KRONECKER_LIMIT {
            return Err(Error::TooLarge {
                unknowns: n,
                limit: DENSE_KRONECKER_LIMIT,
            });
        }
        let mut dense = DMatrix::zeros(n, n);
        let mut unit = vec![0.0; n];
        let mut column = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            self.apply_into(&unit, &mut column);
            unit[j] = 0.0;
            dense.column_mut(j).copy_from_slice(&column);
        }
        Ok(dense)
    }
}

/// Applies `op` to every row of the row-major `nx × ny` array `x`.
fn apply_rows(op: &dyn LinearOperator, x: &[f64], nx: usize, ny: usize, out: &mut [f64]) {
    for i in 0..nx {
        op.apply_into(&x[i * ny..(i + 1) * ny], &mut out[i * ny..(i + 1) * ny]);
    }
}

/// Applies `op` to every column of the row-major `nx × ny` array `x`.
fn apply_cols(op: &dyn LinearOperator, x: &[f64], nx: usize, ny: usize, out: &mut [f64]) {
    let mut col = vec![0.0; nx];
    let mut res = vec![0.0; nx];
    for j in 0..ny {
        for i in 0..nx {
            col[i] = x[i * ny + j];
        }
        op.apply_into(&col, &mut res);
        for i in 0..nx {
            out[i * ny + j] = res[i];
        }
    }
}

impl LinearOperator for KroneckerSumOperator<'_> {
    fn dim(&self) -> usize {
        self.nx() * self.ny()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.nx(), self.ny());
        let mut row_pass = vec![0.0; nx * ny];
        let mut second = vec![0.0; nx * ny];
        apply_rows(self.m_y, x, nx, ny, &mut row_pass);
        apply_cols(self.a_x, &row_pass, nx, ny, y);
        apply_rows(self.a_y, x, nx, ny, &mut row_pass);
        apply_cols(self.m_x, &row_pass, nx, ny, &mut second);
        for (yi, si) in y.iter_mut().zip(&second) {
            *yi += si;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let (dax, dmx) = (self.a_x.diagonal(), self.m_x.diagonal());
        let (day, dmy) = (self.a_y.diagonal(), self.m_y.diagonal());
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.nx() {
            for j in 0..self.ny() {
                out.push(dax[i] * dmy[j] + dmx[i] * day[j]);
            }
        }
        out
    }
}

pub fn flatten(u: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            out.push(u[(i, j)]);
        }
    }
    out
}

pub fn unflatten(v: &[f64], nx: usize, ny: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(nx, ny, v)
}

/// `A_x U M_y + M_x U A_y`.
pub fn kron_sum_matvec(k: &KroneckerSumOperator<'_>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len(k.nx(), u.nrows())?;
    check_len(k.ny(), u.ncols())?;
    Ok(unflatten(&k.apply(&flatten(u)), k.nx(), k.ny()))
}

/// `vec(R)ᵀ K⁻¹ vec(R)`, the squared dual norm of a discrete residual.
pub fn dual_norm_squared(k: &KroneckerSumOperator<'_>, r: &DMatrix<f64>) -> Result<f64> {
    dual_norm_squared_with_tolerance(k, r, 1e-12)
}

pub fn dual_norm_squared_with_tolerance(
    k: &KroneckerSumOperator<'_>,
    r: &DMatrix<f64>,
    tolerance: f64,
) -> Result<f64> {
    check_len(k.nx(), r.nrows())?;
    check_len(k.ny(), r.ncols())?;
    let rhs = flatten(r);
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let solver = SpdSolver {
        preconditioner: Preconditioner::Jacobi,
        tolerance,
        max_iterations: Some(20 * k.dim().max(10)),
        ..SpdSolver::default()
    };
    let x = solver.solve_iterative(k, &rhs)?.solution;
    // 2 rᵀx - xᵀKx differs from rᵀK⁻¹r by -‖x - K⁻¹r‖²_K only.
    let kx = k.apply(&x);
    Ok((2.0 * dot(&rhs, &x) - dot(&x, &kx)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{SymMatrix, Tridiagonal};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::Dense(&b * b.transpose() + DMatrix::identity(n, n) * n as f64)
    }

    fn dense_kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a.kronecker(b)
    }

    #[test]
    fn scalar_kronecker_sum() {
        let (a, m, c, d) = (
            SymMatrix::Dense(DMatrix::from_element(1, 1, 2.0)),
            SymMatrix::Dense(DMatrix::from_element(1, 1, 3.0)),
            SymMatrix::Dense(DMatrix::from_element(1, 1, 5.0)),
            SymMatrix::Dense(DMatrix::from_element(1, 1, 7.0)),
        );
        let k = KroneckerSumOperator::new(&a, &m, &c, &d).unwrap();
        let out = kron_sum_matvec(&k, &DMatrix::from_element(1, 1, 0.5)).unwrap();
        assert_eq!(out[(0, 0)], (2.0 * 7.0 + 3.0 * 5.0) * 0.5);
        let r = DMatrix::from_element(1, 1, 3.0);
        assert_relative_eq!(dual_norm_squared(&k, &r).unwrap(), 9.0 / 29.0, max_relative = 1e-14);
    }

    #[test]
    fn matches_materialized_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (ax, mx, ay, my) = (
            random_spd(4, &mut rng),
            random_spd(4, &mut rng),
            random_spd(4, &mut rng),
            random_spd(4, &mut rng),
        );
        let k = KroneckerSumOperator::new(&ax, &mx, &ay, &my).unwrap();
        let dense = dense_kron(&ax.to_dense(), &my.to_dense()) + dense_kron(&mx.to_dense(), &ay.to_dense());
        let u = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let fast = flatten(&kron_sum_matvec(&k, &u).unwrap());
        let slow = &dense * DVector::from_vec(flatten(&u));
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
        assert_eq!(k.to_dense().unwrap().nrows(), 16);
    }

    #[test]
    fn rank_one_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (ax, mx, ay, my) = (
            random_spd(3, &mut rng),
            random_spd(3, &mut rng),
            random_spd(5, &mut rng),
            random_spd(5, &mut rng),
        );
        let k = KroneckerSumOperator::new(&ax, &mx, &ay, &my).unwrap();
        let p = DVector::from_fn(3, |i, _| i as f64 + 0.5);
        let q = DVector::from_fn(5, |j, _| 1.0 - 0.3 * j as f64);
        let general = kron_sum_matvec(&k, &(&p * q.transpose())).unwrap();
        let apx = DVector::from_vec(ax.apply(p.as_slice()));
        let mpx = DVector::from_vec(mx.apply(p.as_slice()));
        let myq = DVector::from_vec(my.apply(q.as_slice()));
        let ayq = DVector::from_vec(ay.apply(q.as_slice()));
        let rank_one = &apx * myq.transpose() + &mpx * ayq.transpose();
        for (a, b) in general.iter().zip(rank_one.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn dual_norm_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (ax, mx, ay, my) = (
            random_spd(3, &mut rng),
            random_spd(3, &mut rng),
            random_spd(3, &mut rng),
            random_spd(3, &mut rng),
        );
        let k = KroneckerSumOperator::new(&ax, &mx, &ay, &my).unwrap();
        let r = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let dense = k.to_dense().unwrap();
        let rv = DVector::from_vec(flatten(&r));
        let reference = rv.dot(&dense.cholesky().unwrap().solve(&rv));
        assert_relative_eq!(dual_norm_squared(&k, &r).unwrap(), reference, max_relative = 1e-10);
        assert_eq!(dual_norm_squared(&k, &DMatrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let t = SymMatrix::Tridiagonal(Tridiagonal::symmetric(vec![2.0; 3], vec![-1.0; 2]).unwrap());
        let k = KroneckerSumOperator::new(&t, &t, &t, &t).unwrap();
        assert!(kron_sum_matvec(&k, &DMatrix::zeros(2, 3)).is_err());
        let small = SymMatrix::Dense(DMatrix::identity(2, 2));
        assert!(KroneckerSumOperator::new(&t, &small, &t, &t).is_err());
    }
}
