//! Toeplitz matrices and their fast product through circulant embedding.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

/// Square Toeplitz matrix given by its first column and first row.
#[derive(Debug, Clone, PartialEq)]
pub struct Toeplitz {
    first_col: Vec<f64>,
    first_row: Vec<f64>,
}

impl Toeplitz {
    pub fn new(first_col: Vec<f64>, first_row: Vec<f64>) -> Result<Self> {
        check_len(first_col.len(), first_row.len())?;
        if first_col.is_empty() {
            return Err(Error::Domain("Toeplitz matrix must be nonempty".into()));
        }
        if first_col[0] != first_row[0] {
            return Err(Error::Domain(
                "first row and column disagree on the diagonal".into(),
            ));
        }
        Ok(Toeplitz {
            first_col,
            first_row,
        })
    }

    /// Lower-triangular Toeplitz matrix with the given first column.
    pub fn lower_triangular(first_col: Vec<f64>) -> Result<Self> {
        let mut row = vec![0.0; first_col.len()];
        if let Some(&d) = first_col.first() {
            row[0] = d;
        }
        Toeplitz::new(first_col, row)
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.first_col[i - j]
        } else {
            self.first_row[j - i]
        }
    }

    pub fn transpose(&self) -> Toeplitz {
        Toeplitz {
            first_col: self.first_row.clone(),
            first_row: self.first_col.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// `O(n²)` product, used as the reference for the FFT path.
    pub fn matvec_direct(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j) * v[j]).sum())
            .collect()
    }

    pub fn embedding(&self) -> CirculantEmbedding {
        CirculantEmbedding::new(self)
    }
}

/// Precomputed spectrum of the circulant that embeds a Toeplitz matrix.
///
/// The circulant has size `next_power_of_two(2n - 1)`.
#[derive(Clone)]
pub struct CirculantEmbedding {
    dim: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("dim", &self.dim)
            .field("size", &self.spectrum.len())
            .finish()
    }
}

impl CirculantEmbedding {
    pub fn new(t: &Toeplitz) -> Self {
        let n = t.dim();
        let size = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut column = vec![Complex64::new(0.0, 0.0); size];
        for (k, &c) in t.first_col.iter().enumerate() {
            column[k] = Complex64::new(c, 0.0);
        }
        for k in 1..n {
            column[size - k] = Complex64::new(t.first_row[k], 0.0);
        }
        forward.process(&mut column);
        CirculantEmbedding {
            dim: n,
            spectrum: column,
            forward,
            inverse,
        }
    }

    pub fn size(&self) -> usize {
        self.spectrum.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let size = self.size();
        let mut buffer = vec![Complex64::new(0.0, 0.0); size];
        for (b, &x) in buffer.iter_mut().zip(v) {
            b.re = x;
        }
        self.forward.process(&mut buffer);
        for (b, s) in buffer.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buffer);
        let scale = 1.0 / size as f64;
        buffer[..self.dim].iter().map(|c| c.re * scale).collect()
    }
}

/// `T v` through a circulant embedding and FFT.
pub fn toeplitz_matvec(t: &Toeplitz, v: &[f64]) -> Result<Vec<f64>> {
    check_len(t.dim(), v.len())?;
    Ok(t.embedding().apply(v))
}
