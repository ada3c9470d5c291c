//! Symmetric positive-definite solvers and structured products.

mod compensated;
mod kron;
mod matrix;
mod solver;
mod toeplitz;

pub use compensated::{combine_dd, dot_dd, DoubleDouble};
pub use kron::{
    dual_norm_squared, dual_norm_squared_with_tolerance, flatten, kron_sum_matvec, unflatten,
    KroneckerSumOperator, DENSE_KRONECKER_LIMIT,
};
pub use matrix::{axpy, dot, norm2, LinearOperator, SymMatrix, Tridiagonal};
pub use solver::{conjugate_gradient, spd_solve, CgOutcome, Preconditioner, SpdSolver};
pub use toeplitz::{toeplitz_matvec, CirculantEmbedding, Toeplitz};
