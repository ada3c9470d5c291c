//! One-dimensional stiffness, mass and load assembly.
//!
//! Two discretizations of the conformable energy `∫ x^(2(1-α)) |v'|² dx` are
//! provided: weighted P1 finite elements with exact element integrals, and a
//! node-weighted Grünwald difference `G = W T` with `T` Toeplitz, giving the
//! energy `A = h GᵀG`. Both share the P1 mass matrix.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{CirculantEmbedding, LinearOperator, SymMatrix, Toeplitz, Tridiagonal};
use crate::spaces::FractionalInterval;

/// Gauss points per element for load integrals.
pub const LOAD_QUADRATURE_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureTag {
    Tridiagonal,
    Dense,
    ToeplitzProduct,
}

/// Stiffness and mass of one coordinate, over its interior unknowns.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub stiffness: SymMatrix,
    pub mass: SymMatrix,
    pub structure: StructureTag,
    pub interval: FractionalInterval,
    factored: Option<FactoredStiffness>,
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// The stiffness as an operator, using the FFT product when the explicit
    /// matrix is dense.
    pub fn stiffness_operator(&self) -> &dyn LinearOperator {
        match (&self.factored, &self.stiffness) {
            (Some(f), SymMatrix::Dense(_)) => f,
            _ => &self.stiffness,
        }
    }

    pub fn mass_operator(&self) -> &dyn LinearOperator {
        &self.mass
    }

    pub fn check_invariants(&self) -> Result<()> {
        check_len(self.interval.dofs(), self.stiffness.dim())?;
        check_len(self.interval.dofs(), self.mass.dim())?;
        self.stiffness.check_symmetric(1e-12)?;
        self.mass.check_symmetric(1e-12)?;
        Ok(())
    }
}

fn p1_mass(interval: &FractionalInterval) -> SymMatrix {
    let mesh = &interval.mesh;
    let n = mesh.elements();
    let dofs = n - 1;
    let mut diag = vec![0.0; dofs];
    let mut off = vec![0.0; dofs.saturating_sub(1)];
    for e in 1..=n {
        let h = mesh.element_length(e);
        // element e couples nodes e-1 and e; interior node j has index j-1
        if e >= 2 {
            diag[e - 2] += h / 3.0;
        }
        if e <= dofs {
            diag[e - 1] += h / 3.0;
        }
        if e >= 2 && e <= dofs {
            off[e - 2] += h / 6.0;
        }
    }
    SymMatrix::Tridiagonal(Tridiagonal::symmetric(diag, off).expect("consistent band lengths"))
}

/// Exact weighted element integral `∫_{x_{i-1}}^{x_i} x^(2(1-α)) dx`.
pub fn weighted_element_integral(left: f64, right: f64, alpha: f64) -> f64 {
    let beta = 3.0 - 2.0 * alpha;
    if beta == 1.0 {
        right - left
    } else {
        (right.powf(beta) - left.powf(beta)) / beta
    }
}

/// Weighted P1 stiffness and mass with homogeneous Dirichlet ends.
pub fn assemble_fem_pair(interval: &FractionalInterval) -> Result<OperatorPair> {
    let mesh = &interval.mesh;
    let dofs = mesh.interior_dofs();
    if dofs == 0 {
        return Err(Error::Domain("interval has no interior unknowns".into()));
    }
    let alpha = interval.order.value();
    let nodes = mesh.nodes();
    let n = mesh.elements();
    let mut diag = vec![0.0; dofs];
    let mut off = vec![0.0; dofs - 1];
    for e in 1..=n {
        let h = mesh.element_length(e);
        let k = weighted_element_integral(nodes[e - 1], nodes[e], alpha) / (h * h);
        if e >= 2 {
            diag[e - 2] += k;
        }
        if e <= dofs {
            diag[e - 1] += k;
        }
        if e >= 2 && e <= dofs {
            off[e - 2] -= k;
        }
    }
    let stiffness = SymMatrix::Tridiagonal(Tridiagonal::symmetric(diag, off)?);
    Ok(OperatorPair {
        stiffness,
        mass: p1_mass(interval),
        structure: StructureTag::Tridiagonal,
        interval: interval.clone(),
        factored: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StencilChoice {
    /// Two-point backward difference `(v_i - v_{i-1}) / h`.
    #[default]
    BackwardDifference,
    /// Truncated Grünwald coefficients `(-1)^k binom(α, k) / h`, `k < length`.
    Grunwald { length: usize },
}

/// Grünwald weights `(-1)^k binom(α, k)` for `k < length`.
pub fn grunwald_coefficients(alpha: f64, length: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(length);
    let mut g = 1.0;
    for k in 0..length {
        if k > 0 {
            g *= 1.0 - (alpha + 1.0) / k as f64;
        }
        out.push(g);
    }
    out
}

/// Discrete conformable derivative `G = W T` on a uniform grid.
#[derive(Debug, Clone)]
pub struct GrunwaldOperator {
    pub toeplitz: Toeplitz,
    /// Node weights `x_i^(1-α)` over the interior nodes.
    pub weights: Vec<f64>,
    pub h: f64,
    pub stencil: StencilChoice,
}

impl GrunwaldOperator {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Number of nonzero subdiagonals of `T` plus one.
    pub fn bandwidth(&self) -> usize {
        self.toeplitz
            .first_col()
            .iter()
            .rposition(|&c| c != 0.0)
            .map_or(0, |k| k + 1)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let tv = if self.bandwidth() <= 2 {
            self.toeplitz.matvec_direct_banded(v, 2)
        } else {
            self.toeplitz.embedding().apply(v)
        };
        tv.iter().zip(&self.weights).map(|(t, w)| t * w).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.weights[i] * self.toeplitz.entry(i, j))
    }
}

impl Toeplitz {
    fn matvec_direct_banded(&self, v: &[f64], band: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (i.saturating_sub(band - 1)..=i)
                    .map(|j| self.entry(i, j) * v[j])
                    .sum()
            })
            .collect()
    }
}

pub fn assemble_grunwald_operator(
    interval: &FractionalInterval,
    stencil: StencilChoice,
) -> Result<GrunwaldOperator> {
    let mesh = &interval.mesh;
    if !mesh.is_uniform() {
        return Err(Error::InvalidProblem(
            "Grünwald operators require a uniform mesh".into(),
        ));
    }
    let dofs = mesh.interior_dofs();
    let h = mesh.element_length(1);
    let alpha = interval.order.value();
    let coefficients = match stencil {
        StencilChoice::BackwardDifference => vec![1.0, -1.0],
        StencilChoice::Grunwald { length } => {
            if length < 2 {
                return Err(Error::Domain(format!(
                    "Grünwald stencil needs at least 2 coefficients, got {length}"
                )));
            }
            grunwald_coefficients(alpha, length)
        }
    };
    let mut column = vec![0.0; dofs];
    for (c, g) in column.iter_mut().zip(&coefficients) {
        *c = g / h;
    }
    let weights = mesh
        .interior_nodes()
        .iter()
        .map(|&x| interval.order.weight(x))
        .collect();
    Ok(GrunwaldOperator {
        toeplitz: Toeplitz::lower_triangular(column)?,
        weights,
        h,
        stencil,
    })
}

/// Matrix-free `h Tᵀ W² T` through two circulant embeddings.
#[derive(Debug, Clone)]
pub struct FactoredStiffness {
    forward: CirculantEmbedding,
    adjoint: CirculantEmbedding,
    weights_sq: Vec<f64>,
    h: f64,
    diag: Vec<f64>,
}

impl FactoredStiffness {
    pub fn new(g: &GrunwaldOperator) -> Self {
        let weights_sq: Vec<f64> = g.weights.iter().map(|w| w * w).collect();
        let n = g.dim();
        let col = g.toeplitz.first_col();
        // (h GᵀG)_jj = h Σ_{i ≥ j} w_i² T_{i-j}²
        let diag = (0..n)
            .map(|j| g.h * (j..n).map(|i| weights_sq[i] * col[i - j] * col[i - j]).sum::<f64>())
            .collect();
        FactoredStiffness {
            forward: g.toeplitz.embedding(),
            adjoint: g.toeplitz.transpose().embedding(),
            weights_sq,
            h: g.h,
            diag,
        }
    }
}

impl LinearOperator for FactoredStiffness {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = self.forward.apply(x);
        for (ti, w) in t.iter_mut().zip(&self.weights_sq) {
            *ti *= w * self.h;
        }
        y.copy_from_slice(&self.adjoint.apply(&t));
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }
}

/// Energy pair `(h GᵀG, M)` of a Grünwald operator.
pub fn grunwald_energy_pair(g: &GrunwaldOperator, interval: &FractionalInterval) -> Result<OperatorPair> {
    check_len(interval.dofs(), g.dim())?;
    let n = g.dim();
    let h = g.h;
    let stiffness = if g.bandwidth() <= 2 {
        let col = g.toeplitz.first_col();
        let (c0, c1) = (col[0], col.get(1).copied().unwrap_or(0.0));
        let w = &g.weights;
        let diag = (0..n)
            .map(|j| {
                let mut s = (w[j] * c0).powi(2);
                if j + 1 < n {
                    s += (w[j + 1] * c1).powi(2);
                }
                h * s
            })
            .collect();
        let off = (0..n.saturating_sub(1))
            .map(|j| h * w[j + 1] * w[j + 1] * c1 * c0)
            .collect();
        SymMatrix::Tridiagonal(Tridiagonal::symmetric(diag, off)?)
    } else {
        let dense = g.to_dense();
        SymMatrix::Dense(dense.transpose() * &dense * h)
    };
    let factored = match stiffness {
        SymMatrix::Dense(_) => Some(FactoredStiffness::new(g)),
        SymMatrix::Tridiagonal(_) => None,
    };
    Ok(OperatorPair {
        stiffness,
        mass: p1_mass(interval),
        structure: StructureTag::ToeplitzProduct,
        interval: interval.clone(),
        factored,
    })
}

fn gauss_legendre(points: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(points).expect("at least one quadrature point"))
}

/// `(F)_i = ∫ f φ_i dx` over the interior hat functions.
///
/// Uses 5-point Gauss–Legendre per element, doubled on the first element of a
/// fractional coordinate.
pub fn assemble_load_factor<F>(interval: &FractionalInterval, f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let mesh = &interval.mesh;
    let nodes = mesh.nodes();
    let dofs = mesh.interior_dofs();
    let standard = gauss_legendre(LOAD_QUADRATURE_POINTS);
    let refined = gauss_legendre(2 * LOAD_QUADRATURE_POINTS);
    let mut out = vec![0.0; dofs];
    for e in 1..=mesh.elements() {
        let (a, b) = (nodes[e - 1], nodes[e]);
        let h = b - a;
        let rule = if e == 1 && !interval.order.is_classical() {
            &refined
        } else {
            &standard
        };
        // hat rising toward node e, falling from node e-1
        if e <= dofs {
            out[e - 1] += rule.integrate(a, b, |x| f(x) * (x - a) / h);
        }
        if e >= 2 {
            out[e - 2] += rule.integrate(a, b, |x| f(x) * (b - x) / h);
        }
    }
    out
}

/// Separable load `ℓ(p ⊗ q) = Σ (F_xᵀ p)(F_yᵀ q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFactors {
    terms: Vec<(Vec<f64>, Vec<f64>)>,
}

impl LoadFactors {
    pub fn new(terms: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let Some((fx, fy)) = terms.first() else {
            return Err(Error::InvalidProblem("load needs at least one term".into()));
        };
        let (nx, ny) = (fx.len(), fy.len());
        for (x, y) in &terms {
            check_len(nx, x.len())?;
            check_len(ny, y.len())?;
        }
        Ok(LoadFactors { terms })
    }

    pub fn terms(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.terms
    }

    pub fn nx(&self) -> usize {
        self.terms[0].0.len()
    }

    pub fn ny(&self) -> usize {
        self.terms[0].1.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|(x, y)| x.iter().all(|&v| v == 0.0) || y.iter().all(|&v| v == 0.0))
    }

    /// Full `n_x × n_y` load tensor; only for diagnostics and oracles.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nx(), self.ny());
        for (x, y) in &self.terms {
            for i in 0..x.len() {
                for j in 0..y.len() {
                    out[(i, j)] += x[i] * y[j];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{make_graded_mesh, make_uniform_mesh, Axis, FractionalOrder};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval(alpha: f64, n: usize, gamma: f64) -> FractionalInterval {
        FractionalInterval::new(
            FractionalOrder::new(alpha).unwrap(),
            make_graded_mesh(1.0, n, gamma).unwrap(),
            Axis::X,
        )
    }

    #[test]
    fn classical_fem_stiffness() {
        let pair = assemble_fem_pair(&interval(1.0, 4, 1.0)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(pair.stiffness.entry(i, i), 8.0, max_relative = 1e-14);
            if i < 2 {
                assert_relative_eq!(pair.stiffness.entry(i, i + 1), -4.0, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn half_order_single_dof() {
        let pair = assemble_fem_pair(&interval(0.5, 2, 1.0)).unwrap();
        assert_relative_eq!(pair.stiffness.entry(0, 0), 2.0, max_relative = 1e-14);
        assert_relative_eq!(pair.mass.entry(0, 0), 1.0 / 3.0, max_relative = 1e-14);
        // 64-point quadrature on each element confirms the closed form
        let rule = gauss_legendre(64);
        let w1 = rule.integrate(0.0, 0.5, |x| x);
        let w2 = rule.integrate(0.5, 1.0, |x| x);
        assert_relative_eq!((w1 + w2) / 0.25, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn mass_row_sums_integrate_hats() {
        for gamma in [1.0, 2.0] {
            let it = interval(0.7, 9, gamma);
            let pair = assemble_fem_pair(&it).unwrap();
            let ones = vec![1.0; it.dofs()];
            let sums = pair.mass.apply(&ones);
            let mesh = &it.mesh;
            for (i, s) in sums.iter().enumerate() {
                let expected = 0.5 * (mesh.element_length(i + 1) + mesh.element_length(i + 2));
                // rows touching a boundary miss the neighbour outside the domain
                let boundary = if i == 0 {
                    mesh.element_length(1) / 6.0
                } else if i + 1 == it.dofs() {
                    mesh.element_length(mesh.elements()) / 6.0
                } else {
                    0.0
                };
                assert_relative_eq!(s + boundary, expected, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn grunwald_classical_single_dof() {
        let it = interval(1.0, 2, 1.0);
        let g = assemble_grunwald_operator(&it, StencilChoice::default()).unwrap();
        assert_eq!(g.weights, vec![1.0]);
        assert_eq!(g.to_dense()[(0, 0)], 2.0);
        let pair = grunwald_energy_pair(&g, &it).unwrap();
        assert_eq!(pair.stiffness.entry(0, 0), 2.0);
        assert_eq!(pair.structure, StructureTag::ToeplitzProduct);
    }

    #[test]
    fn grunwald_half_order_weights() {
        let it = FractionalInterval::new(
            FractionalOrder::new(0.5).unwrap(),
            make_uniform_mesh(2.0, 4).unwrap(),
            Axis::X,
        );
        let g = assemble_grunwald_operator(&it, StencilChoice::default()).unwrap();
        let expected = [0.5f64.sqrt(), 1.0, 1.5f64.sqrt()];
        for (w, e) in g.weights.iter().zip(expected) {
            assert_relative_eq!(*w, e, max_relative = 1e-15);
        }
        let t = g.toeplitz.to_dense();
        assert_eq!(t[(0, 0)], 2.0);
        assert_eq!(t[(1, 0)], -2.0);
        assert_eq!(t[(2, 0)], 0.0);
        // G x = x^(1-α) exactly at the nodes for f(x) = x
        let samples: Vec<f64> = it.mesh.interior_nodes().to_vec();
        for (gv, x) in g.apply(&samples).iter().zip(&samples) {
            assert_relative_eq!(*gv, x.sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn grunwald_rejects_graded_mesh() {
        assert!(matches!(
            assemble_grunwald_operator(&interval(0.5, 8, 2.0), StencilChoice::default()),
            Err(Error::InvalidProblem(_))
        ));
    }

    #[test]
    fn grunwald_first_order_consistency() {
        // G applied to x² vs 2x^(2-α): error ≤ C h
        for alpha in [0.3, 0.6] {
            let mut worst = Vec::new();
            for n in [16, 32, 64] {
                let it = interval(alpha, n, 1.0);
                let g = assemble_grunwald_operator(&it, StencilChoice::default()).unwrap();
                let x = it.mesh.interior_nodes();
                let samples: Vec<f64> = x.iter().map(|v| v * v).collect();
                let err = g
                    .apply(&samples)
                    .iter()
                    .zip(x)
                    .map(|(d, &xi)| (d - 2.0 * xi.powf(2.0 - alpha)).abs())
                    .fold(0.0, f64::max);
                worst.push(err * n as f64);
            }
            // err / h bounded
            assert!(worst.iter().all(|&c| c <= 1.01), "{worst:?}");
        }
    }

    #[test]
    fn grunwald_energy_is_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        for stencil in [StencilChoice::BackwardDifference, StencilChoice::Grunwald { length: 5 }] {
            let it = interval(0.4, 8, 1.0);
            let g = assemble_grunwald_operator(&it, stencil).unwrap();
            let pair = grunwald_energy_pair(&g, &it).unwrap();
            pair.check_invariants().unwrap();
            assert_eq!(pair.stiffness.symmetry_defect(), 0.0);
            for _ in 0..100 {
                let v: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(pair.stiffness.quad_form(&v) > 0.0);
            }
        }
    }

    #[test]
    fn long_stencil_fast_path_matches_dense() {
        let it = interval(0.6, 40, 1.0);
        let g = assemble_grunwald_operator(&it, StencilChoice::Grunwald { length: 12 }).unwrap();
        let pair = grunwald_energy_pair(&g, &it).unwrap();
        assert!(matches!(pair.stiffness, SymMatrix::Dense(_)));
        let v: Vec<f64> = (0..39).map(|i| (0.2 * i as f64).sin()).collect();
        let fast = pair.stiffness_operator().apply(&v);
        let slow = pair.stiffness.apply(&v);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * slow.iter().map(|s| s.abs()).fold(0.0, f64::max));
        }
        for (a, b) in pair.stiffness_operator().diagonal().iter().zip(pair.stiffness.diagonal()) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn grunwald_coefficient_recurrence() {
        let g = grunwald_coefficients(0.5, 4);
        assert_relative_eq!(g[0], 1.0);
        assert_relative_eq!(g[1], -0.5);
        assert_relative_eq!(g[2], -0.125);
        assert_relative_eq!(g[3], -0.0625);
        assert_eq!(grunwald_coefficients(1.0, 4), vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn load_factors() {
        let it = interval(0.5, 4, 1.0);
        for v in assemble_load_factor(&it, |_| 1.0) {
            assert_relative_eq!(v, 0.25, max_relative = 1e-14);
        }
        assert!(assemble_load_factor(&it, |_| 0.0).iter().all(|&v| v == 0.0));
        // ∫ x φ(x) dx for the hat at 0.5 with h = 0.5 equals x_1 h = 0.25
        let single = interval(0.5, 2, 1.0);
        assert_relative_eq!(assemble_load_factor(&single, |x| x)[0], 0.25, max_relative = 1e-14);
    }

    #[test]
    fn load_factor_validation() {
        assert!(LoadFactors::new(vec![]).is_err());
        assert!(LoadFactors::new(vec![(vec![1.0], vec![1.0]), (vec![1.0, 2.0], vec![1.0])]).is_err());
        let ok = LoadFactors::new(vec![(vec![1.0, 2.0], vec![3.0])]).unwrap();
        assert_eq!(ok.to_dense()[(1, 0)], 6.0);
        assert!(!ok.is_zero());
    }
}
