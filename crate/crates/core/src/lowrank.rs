//! Rank-one modes, separable iterates and residual contractions.
//!
//! Nothing here allocates an `n_x × n_y` array except the explicitly named
//! diagnostic helpers (`to_dense`, `residual_matrix`).

use nalgebra::DMatrix;

use crate::assembly::{LoadFactors, OperatorPair};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, combine_dd, dot, dot_dd, DoubleDouble, KroneckerSumOperator, LinearOperator};

/// The operator pairs of both coordinates.
#[derive(Debug, Clone)]
pub struct TensorOperators {
    pub x: OperatorPair,
    pub y: OperatorPair,
}

impl TensorOperators {
    pub fn new(x: OperatorPair, y: OperatorPair) -> Self {
        TensorOperators { x, y }
    }

    pub fn nx(&self) -> usize {
        self.x.dim()
    }

    pub fn ny(&self) -> usize {
        self.y.dim()
    }

    pub fn kronecker(&self) -> KroneckerSumOperator<'_> {
        KroneckerSumOperator {
            a_x: self.x.stiffness_operator(),
            m_x: self.x.mass_operator(),
            a_y: self.y.stiffness_operator(),
            m_y: self.y.mass_operator(),
        }
    }
}

/// `scale · p ⊗ q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneMode {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub scale: f64,
}

impl RankOneMode {
    pub fn new(p: Vec<f64>, q: Vec<f64>, scale: f64) -> Self {
        RankOneMode { p, q, scale }
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.p.iter().all(|&v| v == 0.0) || self.q.iter().all(|&v| v == 0.0)
    }

    pub fn heap_bytes(&self) -> usize {
        (self.p.capacity() + self.q.capacity()) * std::mem::size_of::<f64>()
    }
}

/// The four one-dimensional forms of a pair of factors.
#[derive(Debug, Clone, Copy)]
struct FactorForms {
    ax: f64,
    mx: f64,
    ay: f64,
    my: f64,
}

impl FactorForms {
    fn of(p: &[f64], q: &[f64], ops: &TensorOperators) -> Self {
        FactorForms {
            ax: dot(p, &ops.x.stiffness_operator().apply(p)),
            mx: dot(p, &ops.x.mass.apply(p)),
            ay: dot(q, &ops.y.stiffness_operator().apply(q)),
            my: dot(q, &ops.y.mass.apply(q)),
        }
    }

    fn energy(&self) -> f64 {
        self.ax * self.my + self.mx * self.ay
    }
}

/// `a(w, w) = scale² [(pᵀA_x p)(qᵀM_y q) + (pᵀM_x p)(qᵀA_y q)]`.
pub fn rank_one_energy(mode: &RankOneMode, ops: &TensorOperators) -> Result<f64> {
    check_len(ops.nx(), mode.p.len())?;
    check_len(ops.ny(), mode.q.len())?;
    if mode.is_zero() {
        return Err(Error::ZeroMode);
    }
    Ok(mode.scale * mode.scale * FactorForms::of(&mode.p, &mode.q, ops).energy())
}

/// Iterate `u_N = Σ_k scale_k p_k ⊗ q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFunction {
    nx: usize,
    ny: usize,
    modes: Vec<RankOneMode>,
}

impl SeparableFunction {
    pub fn new(nx: usize, ny: usize) -> Self {
        SeparableFunction {
            nx,
            ny,
            modes: Vec::new(),
        }
    }

    pub fn from_modes(nx: usize, ny: usize, modes: Vec<RankOneMode>) -> Result<Self> {
        let mut out = SeparableFunction::new(nx, ny);
        for mode in modes {
            out.push(mode)?;
        }
        Ok(out)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn modes(&self) -> &[RankOneMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn push(&mut self, mode: RankOneMode) -> Result<()> {
        check_len(self.nx, mode.p.len())?;
        check_len(self.ny, mode.q.len())?;
        self.modes.push(mode);
        Ok(())
    }

    /// First `n` modes.
    pub fn truncated(&self, n: usize) -> SeparableFunction {
        SeparableFunction {
            nx: self.nx,
            ny: self.ny,
            modes: self.modes[..n.min(self.modes.len())].to_vec(),
        }
    }

    /// Heap footprint of the stored factors.
    pub fn heap_bytes(&self) -> usize {
        self.modes.capacity() * std::mem::size_of::<RankOneMode>()
            + self.modes.iter().map(RankOneMode::heap_bytes).sum::<usize>()
    }

    /// `a(u_N, w)` through one-dimensional contractions.
    pub fn cross_energy(&self, w: &RankOneMode, ops: &TensorOperators) -> f64 {
        let ax_p = ops.x.stiffness_operator().apply(&w.p);
        let mx_p = ops.x.mass.apply(&w.p);
        let ay_q = ops.y.stiffness_operator().apply(&w.q);
        let my_q = ops.y.mass.apply(&w.q);
        w.scale
            * self
                .modes
                .iter()
                .map(|m| {
                    m.scale
                        * (dot(&m.p, &ax_p) * dot(&m.q, &my_q) + dot(&m.p, &mx_p) * dot(&m.q, &ay_q))
                })
                .sum::<f64>()
    }

    /// `a(u_N, u_N)` summed mode-pairwise.
    pub fn energy(&self, ops: &TensorOperators) -> f64 {
        self.modes
            .iter()
            .map(|w| self.cross_energy(w, ops))
            .sum()
    }

    /// Full coefficient tensor; diagnostics only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nx, self.ny);
        for m in &self.modes {
            for i in 0..self.nx {
                let pi = m.scale * m.p[i];
                for j in 0..self.ny {
                    out[(i, j)] += pi * m.q[j];
                }
            }
        }
        out
    }
}

/// `A_x p_k`, `M_x p_k`, `A_y q_k`, `M_y q_k` of one history mode.
#[derive(Debug, Clone)]
struct ModeProducts {
    ax_p: Vec<f64>,
    mx_p: Vec<f64>,
    ay_q: Vec<f64>,
    my_q: Vec<f64>,
}

/// Evaluates `⟨r_N, p ⊗ q⟩` and its partial contractions for
/// `r_N = ℓ - A u_N`.
///
/// The operator images of the history modes are computed once, and both
/// partials are accumulated in double-double from the same images, so they
/// describe one bilinear functional to near working precision even when
/// `r_N` is many orders of magnitude below the load.
#[derive(Debug, Clone)]
pub struct ResidualContraction<'a> {
    pub load: &'a LoadFactors,
    pub history: &'a SeparableFunction,
    pub ops: &'a TensorOperators,
    products: Vec<ModeProducts>,
}

impl<'a> ResidualContraction<'a> {
    pub fn new(
        load: &'a LoadFactors,
        history: &'a SeparableFunction,
        ops: &'a TensorOperators,
    ) -> Result<Self> {
        check_len(ops.nx(), load.nx())?;
        check_len(ops.ny(), load.ny())?;
        check_len(ops.nx(), history.nx())?;
        check_len(ops.ny(), history.ny())?;
        let products = history
            .modes()
            .iter()
            .map(|m| ModeProducts {
                ax_p: ops.x.stiffness_operator().apply(&m.p),
                mx_p: ops.x.mass.apply(&m.p),
                ay_q: ops.y.stiffness_operator().apply(&m.q),
                my_q: ops.y.mass.apply(&m.q),
            })
            .collect();
        Ok(ResidualContraction {
            load,
            history,
            ops,
            products,
        })
    }

    pub fn apply(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        check_len(self.ops.nx(), p.len())?;
        check_len(self.ops.ny(), q.len())?;
        let b = self.partial_x_unchecked(q);
        Ok(dot(p, &b))
    }

    /// `b_q` with `⟨r_N, p ⊗ q⟩ = pᵀ b_q` for every `p`.
    pub fn partial_x(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ops.ny(), q.len())?;
        if q.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroMode);
        }
        Ok(self.partial_x_unchecked(q))
    }

    /// `c_p` with `⟨r_N, p ⊗ q⟩ = qᵀ c_p` for every `q`.
    pub fn partial_y(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ops.nx(), p.len())?;
        if p.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroMode);
        }
        Ok(self.partial_y_unchecked(p))
    }

    fn partial_x_unchecked(&self, q: &[f64]) -> Vec<f64> {
        let terms = self.load.terms().len();
        let mut coefficients = Vec::with_capacity(terms + 2 * self.products.len());
        let mut vectors: Vec<&[f64]> = Vec::with_capacity(coefficients.capacity());
        for (fx, fy) in self.load.terms() {
            coefficients.push(dot_dd(fy, q));
            vectors.push(fx);
        }
        for (m, pr) in self.history.modes().iter().zip(&self.products) {
            coefficients.push(dot_dd(&pr.my_q, q).scale(-m.scale));
            vectors.push(&pr.ax_p);
            coefficients.push(dot_dd(&pr.ay_q, q).scale(-m.scale));
            vectors.push(&pr.mx_p);
        }
        combine_dd(&coefficients, &vectors, self.ops.nx())
    }

    fn partial_y_unchecked(&self, p: &[f64]) -> Vec<f64> {
        let terms = self.load.terms().len();
        let mut coefficients = Vec::with_capacity(terms + 2 * self.products.len());
        let mut vectors: Vec<&[f64]> = Vec::with_capacity(coefficients.capacity());
        for (fx, fy) in self.load.terms() {
            coefficients.push(dot_dd(fx, p));
            vectors.push(fy);
        }
        for (m, pr) in self.history.modes().iter().zip(&self.products) {
            coefficients.push(dot_dd(&pr.ax_p, p).scale(-m.scale));
            vectors.push(&pr.my_q);
            coefficients.push(dot_dd(&pr.mx_p, p).scale(-m.scale));
            vectors.push(&pr.ay_q);
        }
        combine_dd(&coefficients, &vectors, self.ops.ny())
    }

    /// Bytes held by the cached operator images.
    pub fn workspace_bytes(&self) -> usize {
        self.products
            .iter()
            .map(|p| {
                (p.ax_p.capacity() + p.mx_p.capacity() + p.ay_q.capacity() + p.my_q.capacity())
                    * std::mem::size_of::<f64>()
            })
            .sum()
    }

    /// The residual tensor `F - K vec(U_N)`; diagnostics only.
    pub fn residual_matrix(&self) -> DMatrix<f64> {
        let (nx, ny) = (self.ops.nx(), self.ops.ny());
        DMatrix::from_fn(nx, ny, |i, j| {
            let mut acc = DoubleDouble::ZERO;
            for (fx, fy) in self.load.terms() {
                acc = acc.add_product(fx[i], fy[j]);
            }
            for (m, pr) in self.history.modes().iter().zip(&self.products) {
                let s = -m.scale;
                acc = acc
                    + DoubleDouble::ZERO.add_product(pr.ax_p[i], pr.my_q[j]).scale(s)
                    + DoubleDouble::ZERO.add_product(pr.mx_p[i], pr.ay_q[j]).scale(s);
            }
            acc.value()
        })
    }
}

/// Sign so that the first significant entry of `v` is positive.
fn leading_sign(v: &[f64]) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .find(|x| x.abs() > 1e-12 * max)
        .map_or(1.0, |x| x.signum())
}

/// Scales `p` and `q` to unit mass norm and moves the magnitude and sign into
/// `scale`. The represented tensor is unchanged.
pub fn renormalize(mode: &RankOneMode, ops: &TensorOperators) -> Result<RankOneMode> {
    check_len(ops.nx(), mode.p.len())?;
    check_len(ops.ny(), mode.q.len())?;
    if mode.is_zero() {
        return Err(Error::ZeroMode);
    }
    let np = ops.x.mass.quad_form(&mode.p).sqrt();
    let nq = ops.y.mass.quad_form(&mode.q).sqrt();
    let sp = leading_sign(&mode.p);
    let sq = leading_sign(&mode.q);
    let (fp, fq) = (sp / np, sq / nq);
    Ok(RankOneMode {
        p: mode.p.iter().map(|v| v * fp).collect(),
        q: mode.q.iter().map(|v| v * fq).collect(),
        scale: mode.scale * np * nq * sp * sq,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonalized {
    pub mode: RankOneMode,
    /// A factor lost almost all of its norm; `mode` is the input unchanged.
    pub collapsed: bool,
}

/// Relative mass norm below which projection is abandoned.
pub const ORTHOGONALIZATION_FLOOR: f64 = 1e-10;

fn orthonormal_basis<'v>(
    vectors: impl Iterator<Item = &'v Vec<f64>>,
    mass: &dyn LinearOperator,
) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let norm0 = dot(v, &mass.apply(v)).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &mass.apply(&w));
                axpy(-c, b, &mut w);
            }
        }
        let norm = dot(&w, &mass.apply(&w)).sqrt();
        if norm > ORTHOGONALIZATION_FLOOR * norm0 {
            basis.push(w.iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Removes from `v` its mass-orthogonal projection onto `basis`; `None` when
/// the remainder falls below the floor.
fn project_out(v: &[f64], basis: &[Vec<f64>], mass: &dyn LinearOperator) -> Option<Vec<f64>> {
    let norm0 = dot(v, &mass.apply(v)).sqrt();
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &mass.apply(&w));
            axpy(-c, b, &mut w);
        }
    }
    let norm = dot(&w, &mass.apply(&w)).sqrt();
    (norm >= ORTHOGONALIZATION_FLOOR * norm0).then_some(w)
}

/// Gram–Schmidt of `p` against the history's `p_k` in the `M_x` product and
/// of `q` against the `q_k` in `M_y`.
pub fn orthogonalize_new_mode(
    mode: &RankOneMode,
    history: &SeparableFunction,
    ops: &TensorOperators,
) -> Orthogonalized {
    if history.is_empty() {
        return Orthogonalized {
            mode: mode.clone(),
            collapsed: false,
        };
    }
    let px = orthonormal_basis(history.modes().iter().map(|m| &m.p), &ops.x.mass);
    let qy = orthonormal_basis(history.modes().iter().map(|m| &m.q), &ops.y.mass);
    match (
        project_out(&mode.p, &px, &ops.x.mass),
        project_out(&mode.q, &qy, &ops.y.mass),
    ) {
        (Some(p), Some(q)) => Orthogonalized {
            mode: RankOneMode::new(p, q, mode.scale),
            collapsed: false,
        },
        _ => {
            log::warn!("orthogonalization collapsed a factor; keeping the mode unchanged");
            Orthogonalized {
                mode: mode.clone(),
                collapsed: true,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_fem_pair;
    use crate::linalg::{flatten, SymMatrix};
    use crate::spaces::{make_uniform_mesh, Axis, FractionalInterval, FractionalOrder};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fem_ops(alpha: f64, nx: usize, ny: usize) -> TensorOperators {
        let pair = |n: usize, axis| {
            assemble_fem_pair(&FractionalInterval::new(
                FractionalOrder::new(alpha).unwrap(),
                make_uniform_mesh(1.0, n).unwrap(),
                axis,
            ))
            .unwrap()
        };
        TensorOperators::new(pair(nx, Axis::X), pair(ny, Axis::Y))
    }

    fn scalar_ops(ax: f64, mx: f64, ay: f64, my: f64) -> TensorOperators {
        let mut ops = fem_ops(1.0, 2, 2);
        let one = |v: f64| SymMatrix::Dense(DMatrix::from_element(1, 1, v));
        ops.x.stiffness = one(ax);
        ops.x.mass = one(mx);
        ops.y.stiffness = one(ay);
        ops.y.mass = one(my);
        ops
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn scalar_energy() {
        let ops = scalar_ops(2.0, 1.0, 3.0, 1.0);
        let mode = RankOneMode::new(vec![1.0], vec![1.0], 1.0);
        assert_eq!(rank_one_energy(&mode, &ops).unwrap(), 5.0);
        let zero = RankOneMode::new(vec![1.0], vec![1.0], 0.0);
        assert!(matches!(rank_one_energy(&zero, &ops), Err(Error::ZeroMode)));
    }

    #[test]
    fn energy_matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ops = fem_ops(0.6, 5, 5);
        let dense = ops.kronecker().to_dense().unwrap();
        let mode = RankOneMode::new(random_vec(4, &mut rng), random_vec(4, &mut rng), 1.7);
        let u = DVector::from_vec(flatten(&(DVector::from_vec(mode.p.clone()) * DVector::from_vec(mode.q.clone()).transpose() * mode.scale)));
        let reference = u.dot(&(&dense * &u));
        assert_relative_eq!(rank_one_energy(&mode, &ops).unwrap(), reference, max_relative = 1e-12);
    }

    #[test]
    fn separable_energy_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [3, 6, 9] {
            let ops = fem_ops(0.4, n, n);
            let dense = ops.kronecker().to_dense().unwrap();
            let modes = (0..4)
                .map(|_| RankOneMode::new(random_vec(n - 1, &mut rng), random_vec(n - 1, &mut rng), rng.random_range(-2.0..2.0)))
                .collect();
            let u = SeparableFunction::from_modes(n - 1, n - 1, modes).unwrap();
            let v = DVector::from_vec(flatten(&u.to_dense()));
            assert_relative_eq!(u.energy(&ops), v.dot(&(&dense * &v)), max_relative = 1e-10);
        }
    }

    #[test]
    fn residual_without_history_is_load() {
        let ops = fem_ops(0.5, 4, 5);
        let fx = vec![1.0, 2.0, 3.0];
        let fy = vec![0.5, -1.0, 0.25, 2.0];
        let load = LoadFactors::new(vec![(fx.clone(), fy.clone())]).unwrap();
        let empty = SeparableFunction::new(3, 4);
        let r = ResidualContraction::new(&load, &empty, &ops).unwrap();
        let p = [0.3, -0.2, 1.0];
        let q = [1.0, 1.0, -1.0, 0.5];
        assert_relative_eq!(r.apply(&p, &q).unwrap(), dot(&fx, &p) * dot(&fy, &q), max_relative = 1e-15);
        let b = r.partial_x(&q).unwrap();
        for (bi, fi) in b.iter().zip(&fx) {
            assert_relative_eq!(*bi, fi * dot(&fy, &q), max_relative = 1e-15);
        }
    }

    #[test]
    fn residual_matches_dense_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = fem_ops(0.7, 4, 4);
        let load = LoadFactors::new(vec![(random_vec(3, &mut rng), random_vec(3, &mut rng)), (random_vec(3, &mut rng), random_vec(3, &mut rng))]).unwrap();
        let modes = (0..2)
            .map(|_| RankOneMode::new(random_vec(3, &mut rng), random_vec(3, &mut rng), 0.8))
            .collect();
        let u = SeparableFunction::from_modes(3, 3, modes).unwrap();
        let r = ResidualContraction::new(&load, &u, &ops).unwrap();
        // explicitly assembled residual: F - K vec(U)
        let k = ops.kronecker().to_dense().unwrap();
        let residual = DVector::from_vec(flatten(&load.to_dense())) - &k * DVector::from_vec(flatten(&u.to_dense()));
        for _ in 0..10 {
            let p = random_vec(3, &mut rng);
            let q = random_vec(3, &mut rng);
            let w = DVector::from_vec(flatten(&(DVector::from_vec(p.clone()) * DVector::from_vec(q.clone()).transpose())));
            assert_relative_eq!(r.apply(&p, &q).unwrap(), residual.dot(&w), max_relative = 1e-12, epsilon = 1e-14);
        }
        let rm = flatten(&r.residual_matrix());
        for (a, b) in rm.iter().zip(residual.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-13);
        }
    }

    #[test]
    fn partials_are_consistent_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops = fem_ops(0.3, 6, 5);
        let load = LoadFactors::new(vec![(random_vec(5, &mut rng), random_vec(4, &mut rng))]).unwrap();
        let modes = (0..3)
            .map(|_| RankOneMode::new(random_vec(5, &mut rng), random_vec(4, &mut rng), 1.3))
            .collect();
        let u = SeparableFunction::from_modes(5, 4, modes).unwrap();
        let r = ResidualContraction::new(&load, &u, &ops).unwrap();
        let q = random_vec(4, &mut rng);
        let p0 = random_vec(5, &mut rng);
        let bq = r.partial_x(&q).unwrap();
        let cp = r.partial_y(&p0).unwrap();
        for _ in 0..20 {
            let p = random_vec(5, &mut rng);
            let expected = r.apply(&p, &q).unwrap();
            assert_relative_eq!(dot(&p, &bq), expected, max_relative = 1e-12, epsilon = 1e-14);
            let qq = random_vec(4, &mut rng);
            assert_relative_eq!(dot(&qq, &cp), r.apply(&p0, &qq).unwrap(), max_relative = 1e-12, epsilon = 1e-14);
        }
        assert!(matches!(r.partial_x(&[0.0; 4]), Err(Error::ZeroMode)));
    }

    #[test]
    fn renormalize_examples() {
        let ops = scalar_ops(1.0, 4.0, 1.0, 1.0);
        let mode = RankOneMode::new(vec![1.0], vec![1.0], 1.0);
        let out = renormalize(&mode, &ops).unwrap();
        assert_eq!(out.p, vec![0.5]);
        assert_eq!(out.q, vec![1.0]);
        assert_eq!(out.scale, 2.0);
        let again = renormalize(&out, &ops).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn renormalize_preserves_energy_and_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ops = fem_ops(0.5, 8, 6);
        for _ in 0..20 {
            let mode = RankOneMode::new(random_vec(7, &mut rng), random_vec(5, &mut rng), rng.random_range(-3.0..3.0));
            let out = renormalize(&mode, &ops).unwrap();
            assert_relative_eq!(rank_one_energy(&out, &ops).unwrap(), rank_one_energy(&mode, &ops).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(ops.x.mass.quad_form(&out.p), 1.0, max_relative = 1e-14);
            assert_relative_eq!(ops.y.mass.quad_form(&out.q), 1.0, max_relative = 1e-14);
            assert!(out.p[0] > 0.0 && out.q[0] > 0.0);
            let before = SeparableFunction::from_modes(7, 5, vec![mode]).unwrap().to_dense();
            let after = SeparableFunction::from_modes(7, 5, vec![out]).unwrap().to_dense();
            for (a, b) in before.iter().zip(after.iter()) {
                assert_relative_eq!(*a, *b, max_relative = 1e-13, epsilon = 1e-15);
            }
        }
        assert!(renormalize(&RankOneMode::new(vec![0.0; 7], vec![1.0; 5], 1.0), &ops).is_err());
    }

    #[test]
    fn orthogonalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ops = fem_ops(0.5, 9, 9);
        let empty = SeparableFunction::new(8, 8);
        let mode = RankOneMode::new(random_vec(8, &mut rng), random_vec(8, &mut rng), 1.0);
        let out = orthogonalize_new_mode(&mode, &empty, &ops);
        assert_eq!(out.mode, mode);
        assert!(!out.collapsed);

        let history = SeparableFunction::from_modes(
            8,
            8,
            (0..3)
                .map(|_| RankOneMode::new(random_vec(8, &mut rng), random_vec(8, &mut rng), 1.0))
                .collect(),
        )
        .unwrap();
        let parallel = RankOneMode::new(history.modes()[1].p.iter().map(|v| 3.0 * v).collect(), random_vec(8, &mut rng), 1.0);
        let out = orthogonalize_new_mode(&parallel, &history, &ops);
        assert!(out.collapsed);
        assert_eq!(out.mode, parallel);

        let out = orthogonalize_new_mode(&mode, &history, &ops);
        assert!(!out.collapsed);
        for m in history.modes() {
            assert!(ops.x.mass.bilinear(&m.p, &out.mode.p).abs() <= 1e-12);
            assert!(ops.y.mass.bilinear(&m.q, &out.mode.q).abs() <= 1e-12);
        }
    }

    #[test]
    fn storage_grows_with_modes_only() {
        let n = 257;
        let mut u = SeparableFunction::new(n, n);
        let mut sizes = Vec::new();
        for k in 0..8 {
            u.push(RankOneMode::new(vec![1.0; n], vec![1.0; n], k as f64 + 1.0)).unwrap();
            sizes.push(u.truncated(k + 1).heap_bytes());
        }
        for w in sizes.windows(2) {
            assert_eq!(w[1] - w[0], 2 * n * 8 + std::mem::size_of::<RankOneMode>());
        }
    }
}
