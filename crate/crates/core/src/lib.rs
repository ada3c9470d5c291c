//! Greedy low-rank solvers for conformable fractional elliptic and
//! space-time problems on tensor-product domains.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lowrank;
pub mod pgd;
pub mod problems;
pub mod runner;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
