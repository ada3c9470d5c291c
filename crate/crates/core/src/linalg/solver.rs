use nalgebra::DVector;

use super::matrix::{axpy, dot, norm2, LinearOperator, SymMatrix};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradient from a zero starting vector.
///
/// `inverse_diagonal` applies the Jacobi preconditioner when given. Stops
/// once `‖b - Ax‖ ≤ tol ‖b‖`.
pub fn conjugate_gradient<Op>(
    op: &Op,
    b: &[f64],
    inverse_diagonal: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
) -> Result<CgOutcome>
where
    Op: LinearOperator + ?Sized,
{
    let n = op.dim();
    check_len(n, b.len())?;
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let precondition = |r: &[f64]| -> Vec<f64> {
        match inverse_diagonal {
            Some(d) => r.iter().zip(d).map(|(ri, di)| ri * di).collect(),
            None => r.to_vec(),
        }
    };
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = 1.0;
    for iteration in 1..=max_iterations {
        op.apply_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let step = rz / curvature;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        residual = norm2(&r) / b_norm;
        if residual <= tol {
            return Ok(CgOutcome {
                solution: x,
                iterations: iteration,
                relative_residual: residual,
            });
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    None,
}

/// Solver for symmetric positive-definite systems.
///
/// Tridiagonal matrices are factored directly at every size. Dense matrices
/// below `dense_threshold` use Cholesky, larger ones and matrix-free
/// operators use conjugate gradient.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    pub preconditioner: Preconditioner,
    pub tolerance: f64,
    /// Defaults to `10 * dimension` when `None`.
    pub max_iterations: Option<usize>,
    pub dense_threshold: usize,
    pub symmetry_tolerance: f64,
}

impl Default for SpdSolver {
    fn default() -> Self {
        SpdSolver {
            preconditioner: Preconditioner::Jacobi,
            tolerance: 1e-10,
            max_iterations: None,
            dense_threshold: 64,
            symmetry_tolerance: 1e-12,
        }
    }
}

impl SpdSolver {
    pub fn solve(&self, matrix: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
        check_len(matrix.dim(), b.len())?;
        matrix.check_symmetric(self.symmetry_tolerance)?;
        match matrix {
            SymMatrix::Tridiagonal(t) => t.solve_spd(b),
            SymMatrix::Dense(d) if d.nrows() < self.dense_threshold => {
                let chol = d.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
                Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
            }
            SymMatrix::Dense(_) => Ok(self.solve_iterative(matrix, b)?.solution),
        }
    }

    pub fn solve_iterative<Op>(&self, op: &Op, b: &[f64]) -> Result<CgOutcome>
    where
        Op: LinearOperator + ?Sized,
    {
        let max_iterations = self.max_iterations.unwrap_or(10 * op.dim().max(1));
        let inverse = match self.preconditioner {
            Preconditioner::Jacobi => Some(
                op.diagonal()
                    .into_iter()
                    .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
                    .collect::<Vec<_>>(),
            ),
            Preconditioner::None => None,
        };
        conjugate_gradient(op, b, inverse.as_deref(), self.tolerance, max_iterations)
    }
}

/// Solves `S x = b` with the default solver.
pub fn spd_solve(matrix: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::default().solve(matrix, b)
}
