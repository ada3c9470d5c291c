//! Greedy rank-one PGD with an alternating inner maximization.
//!
//! Each greedy step maximizes the Rayleigh quotient `⟨r_N, w⟩² / a(w, w)` over
//! rank-one `w = p ⊗ q` by alternating two symmetric positive-definite solves,
//! then adds `τ w` with the exact line search `τ = ⟨r_N, w⟩ / a(w, w)`. The
//! energy error then drops by exactly `⟨r_N, w⟩² / a(w, w)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::LoadFactors;
use crate::error::{Error, Result};
use crate::linalg::{dot, dual_norm_squared, norm2, KroneckerSumOperator, LinearOperator, SpdSolver, SymMatrix};
use crate::lowrank::{
    orthogonalize_new_mode, rank_one_energy, renormalize, RankOneMode, ResidualContraction,
    SeparableFunction, TensorOperators,
};

pub const DEFAULT_SEED: u64 = 0x5EED;

/// Relative slack allowed before a drop of the inner quotient counts as a
/// monotonicity violation.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    #[default]
    LoadFactor,
    RandomSeeded,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlsConfig {
    pub max_sweeps: usize,
    pub rq_rel_improvement_tol: f64,
    pub init_strategy: InitStrategy,
    /// Rescale factors to unit mass norm after every substep.
    pub renormalize: bool,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            max_sweeps: 20,
            rq_rel_improvement_tol: 1e-6,
            init_strategy: InitStrategy::LoadFactor,
            renormalize: true,
            seed: DEFAULT_SEED,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || !(self.rq_rel_improvement_tol > 0.0) {
            return Err(Error::Config(
                "als: max_sweeps must be >= 1 and rq_rel_improvement_tol > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub eps: f64,
    pub max_modes: usize,
    /// Stopping threshold on `ΔE` while `u_N = 0`.
    pub absolute_floor: f64,
    pub orthogonalize: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            eps: 1e-4,
            max_modes: 100,
            absolute_floor: 1e-28,
            orthogonalize: false,
        }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) || self.max_modes == 0 || !(self.absolute_floor >= 0.0) {
            return Err(Error::Config(
                "greedy: need 0 < eps < 1, max_modes >= 1 and absolute_floor >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Opt-in diagnostics; each costs a Kronecker-sum solve per greedy step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Diagnostics {
    pub theta: bool,
    pub dual_norm: bool,
}

impl Diagnostics {
    pub fn all() -> Self {
        Diagnostics {
            theta: true,
            dual_norm: true,
        }
    }

    fn needs_dual_norm(self) -> bool {
        self.theta || self.dual_norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsOutcome {
    /// Unit-scale mode `p ⊗ q`.
    pub mode: RankOneMode,
    pub rq: f64,
    pub sweeps: usize,
    /// Quotient after every substep, in order.
    pub substep_rq: Vec<f64>,
    pub monotonicity_violations: usize,
    pub solves_x: usize,
    pub solves_y: usize,
}

fn count_violations(values: &[f64]) -> usize {
    values
        .windows(2)
        .filter(|w| w[1] < w[0] * (1.0 - MONOTONICITY_SLACK))
        .count()
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn initial_q(r: &ResidualContraction<'_>, cfg: &AlsConfig) -> Vec<f64> {
    let ny = r.ops.ny();
    match cfg.init_strategy {
        InitStrategy::LoadFactor => r
            .load
            .terms()
            .iter()
            .map(|(fx, fy)| (norm2(fx) * norm2(fy), fy))
            .fold(None::<(f64, &Vec<f64>)>, |best, (n, fy)| match best {
                Some((bn, _)) if bn >= n => best,
                _ => Some((n, fy)),
            })
            .map(|(_, fy)| fy.clone())
            .unwrap_or_else(|| vec![1.0; ny]),
        InitStrategy::Ones => vec![1.0; ny],
        InitStrategy::RandomSeeded => random_vector(ny, cfg.seed.wrapping_add(r.history.len() as u64)),
    }
}

fn mass_normalized(v: Vec<f64>, mass: &SymMatrix) -> Vec<f64> {
    let n = mass.quad_form(&v).sqrt();
    if n > 0.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        v
    }
}

/// Alternating maximization of the Rayleigh quotient over rank-one modes.
///
/// Returns [`Error::ZeroResidual`] when the residual annihilates both the
/// initial and the seeded fallback factor.
pub fn als_maximize(r: &ResidualContraction<'_>, cfg: &AlsConfig) -> Result<AlsOutcome> {
    als_maximize_with(r, cfg, &SpdSolver::default())
}

pub fn als_maximize_with(r: &ResidualContraction<'_>, cfg: &AlsConfig, solver: &SpdSolver) -> Result<AlsOutcome> {
    cfg.validate()?;
    let ops = r.ops;
    let (ax, mx) = (&ops.x.stiffness, &ops.x.mass);
    let (ay, my) = (&ops.y.stiffness, &ops.y.mass);

    let mut q = mass_normalized(initial_q(r, cfg), my);
    let mut b = if q.iter().all(|&v| v == 0.0) {
        vec![0.0; ops.nx()]
    } else {
        r.partial_x(&q)?
    };
    if b.iter().all(|&v| v == 0.0) {
        let seed = cfg.seed.wrapping_add(r.history.len() as u64);
        q = mass_normalized(random_vector(ops.ny(), seed), my);
        b = r.partial_x(&q)?;
        if b.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroResidual);
        }
    }

    let mut substep_rq = Vec::with_capacity(2 * cfg.max_sweeps);
    let mut p = vec![0.0; ops.nx()];
    let (mut solves_x, mut solves_y) = (0, 0);
    let mut previous_sweep_rq: Option<f64> = None;
    let mut rq = 0.0;
    let mut sweeps = 0;
    for sweep in 1..=cfg.max_sweeps {
        sweeps = sweep;
        // p-substep: (A_x m_y(q,q) + M_x a_y(q,q)) p = b_q
        if sweep > 1 {
            b = r.partial_x(&q)?;
        }
        let (ay_qq, my_qq) = (ay.quad_form(&q), my.quad_form(&q));
        let system = SymMatrix::linear_combination(my_qq, ax, ay_qq, mx)?;
        p = solver.solve(&system, &b)?;
        solves_x += 1;
        if cfg.renormalize {
            p = mass_normalized(p, mx);
        }
        let (ax_pp, mx_pp) = (ax.quad_form(&p), mx.quad_form(&p));
        let inner = dot(&b, &p);
        substep_rq.push(inner * inner / (ax_pp * my_qq + mx_pp * ay_qq));

        // q-substep: (A_y m_x(p,p) + M_y a_x(p,p)) q = c_p
        let c = r.partial_y(&p)?;
        let system = SymMatrix::linear_combination(mx_pp, ay, ax_pp, my)?;
        q = solver.solve(&system, &c)?;
        solves_y += 1;
        if cfg.renormalize {
            q = mass_normalized(q, my);
        }
        let (ay_qq, my_qq) = (ay.quad_form(&q), my.quad_form(&q));
        let inner = dot(&c, &q);
        rq = inner * inner / (ax_pp * my_qq + mx_pp * ay_qq);
        substep_rq.push(rq);

        if let Some(prev) = previous_sweep_rq {
            if rq - prev <= cfg.rq_rel_improvement_tol * rq.abs() {
                break;
            }
        }
        previous_sweep_rq = Some(rq);
    }
    let monotonicity_violations = count_violations(&substep_rq);
    if monotonicity_violations > 0 {
        log::warn!("{monotonicity_violations} Rayleigh-quotient decreases inside ALS");
    }
    Ok(AlsOutcome {
        mode: RankOneMode::new(p, q, 1.0),
        rq,
        sweeps,
        substep_rq,
        monotonicity_violations,
        solves_x,
        solves_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub tau: f64,
    /// `⟨r_N, w⟩`
    pub inner: f64,
    /// `a(w, w)`
    pub energy: f64,
    /// `⟨r_N, w⟩² / a(w, w)`
    pub delta_e: f64,
}

/// Exact line search along `w`: adding `τ w` minimizes the energy error.
pub fn line_search_tau(r: &ResidualContraction<'_>, w: &RankOneMode) -> Result<LineSearch> {
    let energy = rank_one_energy(w, r.ops)?;
    let inner = w.scale * r.apply(&w.p, &w.q)?;
    Ok(LineSearch {
        tau: inner / energy,
        inner,
        energy,
        delta_e: inner * inner / energy,
    })
}

/// Achieved cosine `⟨r, w⟩ / (‖r‖_{H'} ‖w‖_a)` between the residual and the
/// selected mode.
pub fn estimate_theta(r: &ResidualContraction<'_>, w: &RankOneMode, k: &KroneckerSumOperator<'_>) -> Result<f64> {
    let dual = dual_norm_squared(k, &r.residual_matrix())?;
    if dual == 0.0 {
        return Err(Error::ZeroResidual);
    }
    let ls = line_search_tau(r, w)?;
    Ok(ls.inner / (dual.sqrt() * ls.energy.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyStatus {
    Converged,
    Stagnated,
    MaxModes,
}

impl GreedyStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GreedyStatus::Converged => "converged",
            GreedyStatus::Stagnated => "stagnated",
            GreedyStatus::MaxModes => "max_modes",
        }
    }
}

/// Diagnostics of one accepted greedy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based index of the mode added by this step.
    pub n: usize,
    pub delta_e: f64,
    pub rq: f64,
    pub tau: f64,
    pub sweeps: usize,
    pub theta_hat: Option<f64>,
    /// `‖r_{N-1}‖²_{H'}` before this step.
    pub energy_error_sq: Option<f64>,
    pub monotonicity_violations: usize,
    pub solves_x: usize,
    pub solves_y: usize,
    pub orthogonalization_collapsed: bool,
}

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub solution: SeparableFunction,
    pub records: Vec<IterationRecord>,
    pub status: GreedyStatus,
    /// `ΔE` of the last step examined, accepted or not.
    pub final_delta_e: f64,
    /// `a(u_N, u_N)`
    pub energy: f64,
    /// `‖r_N‖²_{H'}` after the last accepted mode, when diagnostics are on.
    pub final_energy_error_sq: Option<f64>,
}

impl GreedyOutcome {
    pub fn monotonicity_violations(&self) -> usize {
        self.records.iter().map(|r| r.monotonicity_violations).sum()
    }
}

/// Relative closeness of consecutive `ΔE` that counts as stagnation.
pub const STAGNATION_RATIO: f64 = 1e-3;

/// Builds `u_N` from `u_0 = 0` one rank-one mode at a time.
pub fn greedy_solve(
    ops: &TensorOperators,
    load: &LoadFactors,
    cfg: &GreedyConfig,
    als_cfg: &AlsConfig,
    diagnostics: Diagnostics,
) -> Result<GreedyOutcome> {
    cfg.validate()?;
    als_cfg.validate()?;
    let kron = ops.kronecker();
    let mut u = SeparableFunction::new(ops.nx(), ops.ny());
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut energy_u = 0.0;
    let mut final_delta_e = 0.0;

    let dual_of = |u: &SeparableFunction| -> Result<f64> {
        let r = ResidualContraction::new(load, u, ops)?;
        dual_norm_squared(&kron, &r.residual_matrix())
    };

    let status = loop {
        let step = u.len() + 1;
        if u.len() >= cfg.max_modes {
            break GreedyStatus::MaxModes;
        }
        let r = ResidualContraction::new(load, &u, ops)?;
        let als = match als_maximize(&r, als_cfg) {
            Ok(a) => a,
            Err(Error::ZeroResidual) => {
                final_delta_e = 0.0;
                break GreedyStatus::Converged;
            }
            Err(e) => return Err(e.at_step(step)),
        };

        let mut w = als.mode.clone();
        let mut collapsed = false;
        if cfg.orthogonalize {
            let o = orthogonalize_new_mode(&w, &u, ops);
            collapsed = o.collapsed;
            w = o.mode;
        }
        if als_cfg.renormalize {
            w = renormalize(&w, ops).map_err(|e| e.at_step(step))?;
        }
        let mut ls = line_search_tau(&r, &w).map_err(|e| e.at_step(step))?;
        if ls.inner < 0.0 {
            w.scale = -w.scale;
            ls = line_search_tau(&r, &w).map_err(|e| e.at_step(step))?;
        }
        final_delta_e = ls.delta_e;

        let threshold = if u.is_empty() {
            cfg.absolute_floor
        } else {
            cfg.eps * cfg.eps * energy_u
        };
        if ls.delta_e <= threshold {
            break GreedyStatus::Converged;
        }
        if let Some(prev) = records.last() {
            let flat = (ls.delta_e - prev.delta_e).abs() <= STAGNATION_RATIO * prev.delta_e;
            let small = cfg.eps * energy_u;
            if flat && ls.delta_e <= small && prev.delta_e <= small {
                break GreedyStatus::Stagnated;
            }
        }

        let (energy_error_sq, theta_hat) = if diagnostics.needs_dual_norm() {
            let e = dual_norm_squared(&kron, &r.residual_matrix()).map_err(|e| e.at_step(step))?;
            let theta = (diagnostics.theta && e > 0.0).then(|| ls.inner / (e.sqrt() * ls.energy.sqrt()));
            (Some(e), theta)
        } else {
            (None, None)
        };

        let cross = u.cross_energy(&w, ops);
        energy_u += 2.0 * ls.tau * cross + ls.tau * ls.tau * ls.energy;
        u.push(RankOneMode::new(w.p, w.q, ls.tau * w.scale))?;
        records.push(IterationRecord {
            n: step,
            delta_e: ls.delta_e,
            rq: als.rq,
            tau: ls.tau,
            sweeps: als.sweeps,
            theta_hat,
            energy_error_sq: if diagnostics.dual_norm { energy_error_sq } else { None },
            monotonicity_violations: als.monotonicity_violations,
            solves_x: als.solves_x,
            solves_y: als.solves_y,
            orthogonalization_collapsed: collapsed,
        });
    };

    let final_energy_error_sq = if diagnostics.needs_dual_norm() {
        Some(dual_of(&u)?)
    } else {
        None
    };
    Ok(GreedyOutcome {
        solution: u,
        records,
        status,
        final_delta_e,
        energy: energy_u,
        final_energy_error_sq,
    })
}

/// Energy-norm distance `‖U - V‖_K` between two coefficient tensors.
pub fn energy_distance(k: &KroneckerSumOperator<'_>, u: &nalgebra::DMatrix<f64>, v: &nalgebra::DMatrix<f64>) -> f64 {
    let diff = crate::linalg::flatten(&(u - v));
    dot(&diff, &k.apply(&diff)).max(0.0).sqrt()
}
