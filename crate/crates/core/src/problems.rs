//! The two model problems: stationary fractional Poisson on a rectangle and
//! a space-time problem with an `H¹₀(0, T)` time axis.
//!
//! For `spacetime` the time axis occupies the first tensor slot, so the
//! energy reads `A_t ⊗ M_x + M_t ⊗ A_x`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_fem_pair, assemble_grunwald_operator, assemble_load_factor, grunwald_energy_pair, LoadFactors,
    OperatorPair, StencilChoice,
};
use crate::error::{check_len, Error, Result};
use crate::linalg::{
    flatten, unflatten, LinearOperator, Preconditioner, SpdSolver, DENSE_KRONECKER_LIMIT,
};
use crate::lowrank::TensorOperators;
use crate::spaces::{make_graded_mesh, make_uniform_mesh, Axis, FractionalInterval, FractionalOrder};

/// Largest `n_x · n_y` accepted by [`reference_solution_dense`].
pub const REFERENCE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    Poisson2d,
    Spacetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    #[default]
    Fem,
    Grunwald,
}

/// `coefficient · x^x_power · y^y_power`; for `spacetime`, `y` is time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    #[serde(default = "one")]
    pub coefficient: f64,
    #[serde(default)]
    pub x_power: u32,
    #[serde(default)]
    pub y_power: u32,
}

fn one() -> f64 {
    1.0
}

/// Closed catalog of separable right-hand sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Polynomial { monomials: Vec<Monomial> },
    /// Load whose discrete solution is `p* q*ᵀ` with
    /// `p*_i = sin(k_x π x_i / L_x)` and `q*_j = sin(k_y π y_j / L_y)`.
    Manufactured {
        #[serde(default = "one_u32")]
        x_wavenumber: u32,
        #[serde(default = "one_u32")]
        y_wavenumber: u32,
    },
}

fn one_u32() -> u32 {
    1
}

impl Default for LoadSpec {
    fn default() -> Self {
        LoadSpec::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Order on the spatial `x` axis.
    pub alpha_x: f64,
    /// Order on the `y` axis (poisson2d) or time axis (spacetime, must be 1).
    pub alpha_y: Option<f64>,
    pub n_x: usize,
    /// Elements on the `y` or time axis.
    pub n_y: usize,
    pub length_x: f64,
    /// `L_y` for poisson2d, the final time `T` for spacetime.
    pub length_y: f64,
    /// Mesh grading exponents; `None` picks 2 for fractional FEM axes and
    /// uniform otherwise.
    pub grading_x: Option<f64>,
    pub grading_y: Option<f64>,
    pub discretization: Discretization,
    pub stencil: StencilChoice,
    pub load: LoadSpec,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            kind: ProblemKind::Poisson2d,
            alpha_x: 0.5,
            alpha_y: None,
            n_x: 32,
            n_y: 32,
            length_x: 1.0,
            length_y: 1.0,
            grading_x: None,
            grading_y: None,
            discretization: Discretization::Fem,
            stencil: StencilChoice::default(),
            load: LoadSpec::default(),
        }
    }
}

impl ProblemSpec {
    pub fn poisson(alpha: f64, n: usize) -> Self {
        ProblemSpec {
            alpha_x: alpha,
            n_x: n,
            n_y: n,
            ..ProblemSpec::default()
        }
    }

    pub fn spacetime(alpha_x: f64, n_x: usize, n_t: usize, final_time: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Spacetime,
            alpha_x,
            n_x,
            n_y: n_t,
            length_y: final_time,
            ..ProblemSpec::default()
        }
    }

    pub fn order_x(&self) -> Result<FractionalOrder> {
        FractionalOrder::new(self.alpha_x)
    }

    pub fn order_y(&self) -> Result<FractionalOrder> {
        match (self.kind, self.alpha_y) {
            (ProblemKind::Poisson2d, a) => FractionalOrder::new(a.unwrap_or(self.alpha_x)),
            (ProblemKind::Spacetime, None | Some(1.0)) => Ok(FractionalOrder::CLASSICAL),
            (ProblemKind::Spacetime, Some(a)) => Err(Error::InvalidProblem(format!(
                "the time axis of a spacetime problem has order 1, got alpha_y = {a}"
            ))),
        }
    }

    fn grading_for(&self, order: FractionalOrder, explicit: Option<f64>) -> Result<f64> {
        match (self.discretization, explicit) {
            (Discretization::Grunwald, Some(g)) if g != 1.0 => Err(Error::InvalidProblem(format!(
                "grunwald discretization needs a uniform mesh, got grading {g}"
            ))),
            (Discretization::Grunwald, _) => Ok(1.0),
            (Discretization::Fem, Some(g)) => Ok(g),
            (Discretization::Fem, None) => Ok(order.default_grading()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.order_x()?;
        self.order_y()?;
        self.grading_for(FractionalOrder::CLASSICAL, self.grading_x)?;
        self.grading_for(FractionalOrder::CLASSICAL, self.grading_y)?;
        Ok(())
    }
}

fn interval(order: FractionalOrder, length: f64, n: usize, grading: f64, axis: Axis) -> Result<FractionalInterval> {
    let mesh = if grading == 1.0 {
        make_uniform_mesh(length, n)?
    } else {
        make_graded_mesh(length, n, grading)?
    };
    Ok(FractionalInterval::new(order, mesh, axis))
}

fn assemble_pair(interval: &FractionalInterval, spec: &ProblemSpec) -> Result<OperatorPair> {
    match spec.discretization {
        Discretization::Fem => assemble_fem_pair(interval),
        Discretization::Grunwald => {
            let g = assemble_grunwald_operator(interval, spec.stencil)?;
            grunwald_energy_pair(&g, interval)
        }
    }
}

/// An assembled problem ready for the greedy solver.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub ops: TensorOperators,
    pub load: LoadFactors,
    /// `(p*, q*)` for manufactured loads.
    pub exact_factors: Option<(Vec<f64>, Vec<f64>)>,
}

impl Problem {
    /// The spatial `x` pair, whichever slot it occupies.
    pub fn space_pair(&self) -> &OperatorPair {
        match self.spec.kind {
            ProblemKind::Poisson2d => &self.ops.x,
            ProblemKind::Spacetime => &self.ops.y,
        }
    }
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Problem> {
    spec.validate()?;
    let (ox, oy) = (spec.order_x()?, spec.order_y()?);
    let gx = spec.grading_for(ox, spec.grading_x)?;
    let gy = spec.grading_for(oy, spec.grading_y)?;
    let second_axis = match spec.kind {
        ProblemKind::Poisson2d => Axis::Y,
        ProblemKind::Spacetime => Axis::T,
    };
    let ix = interval(ox, spec.length_x, spec.n_x, gx, Axis::X)?;
    let iy = interval(oy, spec.length_y, spec.n_y, gy, second_axis)?;
    let px = assemble_pair(&ix, spec)?;
    let py = assemble_pair(&iy, spec)?;
    // (first slot, second slot) in terms of (x-like, y-like) coordinates
    let swap = spec.kind == ProblemKind::Spacetime;
    let ops = if swap {
        TensorOperators::new(py, px)
    } else {
        TensorOperators::new(px, py)
    };

    let (mut exact_factors, terms) = match &spec.load {
        LoadSpec::Constant { value } => {
            let fx = assemble_load_factor(&ix, |_| *value);
            let fy = assemble_load_factor(&iy, |_| 1.0);
            (None, vec![(fx, fy)])
        }
        LoadSpec::Polynomial { monomials } => {
            if monomials.is_empty() {
                return Err(Error::InvalidProblem("polynomial load needs at least one monomial".into()));
            }
            let terms = monomials
                .iter()
                .map(|m| {
                    let fx = assemble_load_factor(&ix, |x| m.coefficient * x.powi(m.x_power as i32));
                    let fy = assemble_load_factor(&iy, |y| y.powi(m.y_power as i32));
                    (fx, fy)
                })
                .collect();
            (None, terms)
        }
        LoadSpec::Manufactured { x_wavenumber, y_wavenumber } => {
            let sine = |it: &FractionalInterval, k: u32| -> Vec<f64> {
                let l = it.mesh.length();
                it.mesh
                    .interior_nodes()
                    .iter()
                    .map(|&x| (k as f64 * PI * x / l).sin())
                    .collect()
            };
            let (p, q) = (sine(&ix, *x_wavenumber), sine(&iy, *y_wavenumber));
            (Some((p, q)), Vec::new())
        }
    };
    let load = match exact_factors.take() {
        Some((p, q)) => {
            let (first, second) = if swap { (q, p) } else { (p, q) };
            let load = manufactured_rank_one_load(&ops, &first, &second)?;
            exact_factors = Some((first, second));
            load
        }
        None => {
            let terms = if swap {
                terms.into_iter().map(|(fx, fy)| (fy, fx)).collect()
            } else {
                terms
            };
            LoadFactors::new(terms)?
        }
    };
    Ok(Problem {
        spec: spec.clone(),
        ops,
        load,
        exact_factors,
    })
}

/// Two-term load `{(A_x p*, M_y q*), (M_x p*, A_y q*)}` whose discrete
/// solution is exactly `p* q*ᵀ`.
pub fn manufactured_rank_one_load(ops: &TensorOperators, p_star: &[f64], q_star: &[f64]) -> Result<LoadFactors> {
    check_len(ops.nx(), p_star.len())?;
    check_len(ops.ny(), q_star.len())?;
    if p_star.iter().all(|&v| v == 0.0) || q_star.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMode);
    }
    LoadFactors::new(vec![
        (ops.x.stiffness_operator().apply(p_star), ops.y.mass.apply(q_star)),
        (ops.x.mass.apply(p_star), ops.y.stiffness_operator().apply(q_star)),
    ])
}

/// Solves `K vec(U) = vec(F)` directly (Cholesky when the dense Kronecker
/// sum is small enough, CG otherwise).
pub fn reference_solution_dense(ops: &TensorOperators, load: &LoadFactors) -> Result<DMatrix<f64>> {
    check_len(ops.nx(), load.nx())?;
    check_len(ops.ny(), load.ny())?;
    let n = ops.nx() * ops.ny();
    if n > REFERENCE_LIMIT {
        return Err(Error::TooLarge {
            unknowns: n,
            limit: REFERENCE_LIMIT,
        });
    }
    let rhs = flatten(&load.to_dense());
    let k = ops.kronecker();
    let solution = if n <= DENSE_KRONECKER_LIMIT {
        let dense = k.to_dense()?;
        let chol = dense.cholesky().ok_or(Error::NotPositiveDefinite)?;
        chol.solve(&DVector::from_vec(rhs)).as_slice().to_vec()
    } else {
        let solver = SpdSolver {
            preconditioner: Preconditioner::Jacobi,
            tolerance: 1e-13,
            max_iterations: Some(20 * n),
            ..SpdSolver::default()
        };
        solver.solve_iterative(&k, &rhs)?.solution
    };
    Ok(unflatten(&solution, ops.nx(), ops.ny()))
}
