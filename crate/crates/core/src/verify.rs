//! Built-in invariant suites behind `verify --level fast|full`.
//!
//! Suites are independent and may run on up to `PGD_THREADS` threads; the
//! report lists them in declaration order regardless of scheduling.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_fem_pair, assemble_load_factor, LoadFactors};
use crate::linalg::{flatten, spd_solve, SymMatrix, Toeplitz};
use crate::lowrank::{rank_one_energy, RankOneMode, SeparableFunction, TensorOperators};
use crate::pgd::{greedy_solve, energy_distance, AlsConfig, Diagnostics, GreedyConfig, GreedyStatus};
use crate::problems::{
    build_problem, manufactured_rank_one_load, reference_solution_dense, Discretization, LoadSpec, ProblemSpec,
};
use crate::spaces::{make_graded_mesh, make_uniform_mesh, Axis, FractionalInterval, FractionalOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown verify level `{other}` (fast|full)")),
        }
    }
}

/// Deliberate corruptions used to check that the suites catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Adds `1e-3 · max|A|` to one off-diagonal stiffness entry.
    AsymmetricStiffness,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub level: Level,
    pub fault: Option<Fault>,
    pub threads: usize,
}

impl VerifyOptions {
    pub fn new(level: Level) -> Self {
        VerifyOptions {
            level,
            fault: None,
            threads: threads_from_env(),
        }
    }
}

/// `PGD_THREADS`, defaulting to 1.
pub fn threads_from_env() -> usize {
    std::env::var("PGD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<(), String>,
    pub millis: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub results: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_ok())
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.outcome.is_err())
    }
}

type Check = fn(Option<Fault>) -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn fem(alpha: f64, n: usize) -> Result<crate::assembly::OperatorPair, String> {
    let order = FractionalOrder::new(alpha).map_err(|e| e.to_string())?;
    let mesh = make_uniform_mesh(1.0, n).map_err(|e| e.to_string())?;
    assemble_fem_pair(&FractionalInterval::new(order, mesh, Axis::X)).map_err(|e| e.to_string())
}

fn check_meshes(_: Option<Fault>) -> Result<(), String> {
    let u = make_uniform_mesh(1.0, 4).map_err(|e| e.to_string())?;
    ensure(u.nodes() == [0.0, 0.25, 0.5, 0.75, 1.0], || format!("uniform nodes {:?}", u.nodes()))?;
    let g = make_graded_mesh(1.0, 4, 1.0).map_err(|e| e.to_string())?;
    ensure(g.nodes() == u.nodes(), || "grading 1 differs from uniform".into())?;
    let g2 = make_graded_mesh(1.0, 2, 2.0).map_err(|e| e.to_string())?;
    ensure(g2.nodes() == [0.0, 0.25, 1.0], || format!("graded nodes {:?}", g2.nodes()))
}

fn check_classical_stiffness(_: Option<Fault>) -> Result<(), String> {
    let p = fem(1.0, 4)?;
    let d = p.stiffness.to_dense();
    ensure((d[(0, 0)] - 8.0).abs() <= 1e-14 && (d[(0, 1)] + 4.0).abs() <= 1e-14, || {
        format!("classical stiffness {d}")
    })?;
    let p = fem(0.5, 2)?;
    ensure(close(p.stiffness.entry(0, 0), 2.0, 1e-14), || {
        format!("alpha = 0.5, n = 2 stiffness {}", p.stiffness.entry(0, 0))
    })?;
    ensure(close(p.mass.entry(0, 0), 1.0 / 3.0, 1e-14), || "P1 mass".into())
}

fn check_stiffness_symmetric(fault: Option<Fault>) -> Result<(), String> {
    for alpha in [0.3, 0.5, 0.9] {
        let mut p = fem(alpha, 16)?;
        if fault == Some(Fault::AsymmetricStiffness) {
            let scale = p.stiffness.to_dense().amax();
            p.stiffness.add_to_entry(1, 0, 1e-3 * scale);
        }
        p.check_invariants().map_err(|e| format!("alpha = {alpha}: {e}"))?;
    }
    Ok(())
}

fn check_toeplitz_small(_: Option<Fault>) -> Result<(), String> {
    let t = Toeplitz::lower_triangular(vec![1.0, -1.0, 0.0]).map_err(|e| e.to_string())?;
    let y = crate::linalg::toeplitz_matvec(&t, &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure(y.iter().zip([1.0, 1.0, 1.0]).all(|(a, b)| (a - b).abs() <= 1e-14), || format!("{y:?}"))?;
    for n in [3, 17, 64] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let row: Vec<f64> = std::iter::once(col[0]).chain((1..n).map(|_| rng.random_range(-1.0..1.0))).collect();
        let t = Toeplitz::new(col, row).map_err(|e| e.to_string())?;
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = crate::linalg::toeplitz_matvec(&t, &v).map_err(|e| e.to_string())?;
        let slow = t.matvec_direct(&v);
        let scale = slow.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let err = fast.iter().zip(&slow).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        ensure(err <= 1e-12 * scale, || format!("n = {n}: FFT error {err:.3e}"))?;
    }
    Ok(())
}

fn check_scalar_contractions(_: Option<Fault>) -> Result<(), String> {
    let mut ops = build_problem(&ProblemSpec {
        grading_x: Some(1.0),
        grading_y: Some(1.0),
        ..ProblemSpec::poisson(1.0, 2)
    })
    .map_err(|e| e.to_string())?
    .ops;
    let one = |v: f64| SymMatrix::Dense(DMatrix::from_element(1, 1, v));
    ops.x.stiffness = one(2.0);
    ops.x.mass = one(1.0);
    ops.y.stiffness = one(3.0);
    ops.y.mass = one(1.0);
    let e = rank_one_energy(&RankOneMode::new(vec![1.0], vec![1.0], 1.0), &ops).map_err(|e| e.to_string())?;
    ensure(e == 5.0, || format!("scalar energy {e}"))?;
    let s = spd_solve(&one(2.0), &[4.0]).map_err(|e| e.to_string())?;
    ensure(close(s[0], 2.0, 1e-15), || format!("scalar solve {s:?}"))?;
    let load = manufactured_rank_one_load(&ops, &[1.0], &[1.0]).map_err(|e| e.to_string())?;
    let u = reference_solution_dense(&ops, &load).map_err(|e| e.to_string())?;
    ensure(close(u[(0, 0)], 1.0, 1e-14), || format!("scalar reference {}", u[(0, 0)]))
}

fn check_rank_one_exactness(_: Option<Fault>) -> Result<(), String> {
    let spec = ProblemSpec {
        load: LoadSpec::Manufactured { x_wavenumber: 1, y_wavenumber: 1 },
        ..ProblemSpec::poisson(0.5, 8)
    };
    let p = build_problem(&spec).map_err(|e| e.to_string())?;
    let out = greedy_solve(&p.ops, &p.load, &GreedyConfig::default(), &AlsConfig::default(), Diagnostics::all())
        .map_err(|e| e.to_string())?;
    ensure(out.records.len() == 1, || format!("{} modes for a rank-one solution", out.records.len()))?;
    let theta = out.records[0].theta_hat.unwrap_or(0.0);
    ensure(theta >= 1.0 - 1e-8, || format!("theta_hat {theta}"))
}

fn greedy_vs_dense(spec: &ProblemSpec) -> Result<(), String> {
    let p = build_problem(spec).map_err(|e| e.to_string())?;
    let cfg = GreedyConfig {
        eps: 1e-12,
        max_modes: 200,
        ..GreedyConfig::default()
    };
    let out = greedy_solve(&p.ops, &p.load, &cfg, &AlsConfig::default(), Diagnostics::default())
        .map_err(|e| e.to_string())?;
    let reference = reference_solution_dense(&p.ops, &p.load).map_err(|e| e.to_string())?;
    let k = p.ops.kronecker();
    let err = energy_distance(&k, &out.solution.to_dense(), &reference);
    ensure(err <= 1e-6, || format!("{spec:?}: energy-norm distance {err:.3e}"))
}

fn check_dense_oracle(_: Option<Fault>) -> Result<(), String> {
    for discretization in [Discretization::Fem, Discretization::Grunwald] {
        greedy_vs_dense(&ProblemSpec {
            discretization,
            n_x: 5,
            n_y: 4,
            ..ProblemSpec::poisson(0.5, 5)
        })?;
        greedy_vs_dense(&ProblemSpec {
            discretization,
            ..ProblemSpec::spacetime(0.7, 5, 5, 1.0)
        })?;
    }
    Ok(())
}

fn check_spd_random(_: Option<Fault>) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for trial in 0..100 {
        let alpha = rng.random_range(0.05..=1.0);
        let n = rng.random_range(2..=40);
        let grading = rng.random_range(1.0..3.0);
        let order = FractionalOrder::new(alpha).map_err(|e| e.to_string())?;
        let mesh = make_graded_mesh(1.0, n, grading).map_err(|e| e.to_string())?;
        let p = assemble_fem_pair(&FractionalInterval::new(order, mesh, Axis::X)).map_err(|e| e.to_string())?;
        p.check_invariants().map_err(|e| format!("trial {trial}: {e}"))?;
        for m in [&p.stiffness, &p.mass] {
            ensure(m.to_dense().cholesky().is_some(), || {
                format!("trial {trial}: alpha = {alpha}, n = {n} not positive definite")
            })?;
        }
    }
    Ok(())
}

fn check_energy_random(_: Option<Fault>) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..100 {
        let (nx, ny) = (rng.random_range(2..=8), rng.random_range(2..=8));
        let spec = ProblemSpec {
            n_x: nx + 1,
            n_y: ny + 1,
            alpha_y: Some(rng.random_range(0.1..=1.0)),
            ..ProblemSpec::poisson(rng.random_range(0.1..=1.0), nx + 1)
        };
        let ops: TensorOperators = build_problem(&spec).map_err(|e| e.to_string())?.ops;
        let modes = (0..rng.random_range(1..=4))
            .map(|_| {
                RankOneMode::new(
                    (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    (0..ny).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let u = SeparableFunction::from_modes(nx, ny, modes).map_err(|e| e.to_string())?;
        let dense = ops.kronecker().to_dense().map_err(|e| e.to_string())?;
        let v = DVector::from_vec(flatten(&u.to_dense()));
        let reference = v.dot(&(&dense * &v));
        let fast = u.energy(&ops);
        ensure(close(fast, reference, 1e-10), || format!("trial {trial}: energy {fast} vs {reference}"))?;
    }
    Ok(())
}

fn check_one_step_identity(_: Option<Fault>) -> Result<(), String> {
    for alpha in [0.3, 0.5, 0.8] {
        let p = build_problem(&ProblemSpec::poisson(alpha, 32)).map_err(|e| e.to_string())?;
        let cfg = GreedyConfig {
            eps: 1e-4,
            max_modes: 40,
            ..GreedyConfig::default()
        };
        let out = greedy_solve(&p.ops, &p.load, &cfg, &AlsConfig::default(), Diagnostics::all())
            .map_err(|e| e.to_string())?;
        ensure(out.status == GreedyStatus::Converged, || format!("alpha = {alpha}: {:?}", out.status))?;
        let mut errors: Vec<f64> = out.records.iter().filter_map(|r| r.energy_error_sq).collect();
        errors.extend(out.final_energy_error_sq);
        let e0 = errors[0];
        for (k, r) in out.records.iter().enumerate() {
            let drop = errors[k] - errors[k + 1];
            ensure((r.delta_e - drop).abs() <= 1e-8 * e0, || {
                format!("alpha = {alpha}, step {}: delta_E {} vs drop {drop}", r.n, r.delta_e)
            })?;
        }
        ensure(out.monotonicity_violations() == 0, || format!("alpha = {alpha}: ALS quotient decreased"))?;
    }
    Ok(())
}

fn check_load_quadrature(_: Option<Fault>) -> Result<(), String> {
    let order = FractionalOrder::new(0.5).map_err(|e| e.to_string())?;
    let it = FractionalInterval::new(order, make_uniform_mesh(1.0, 4).map_err(|e| e.to_string())?, Axis::X);
    let f = assemble_load_factor(&it, |_| 1.0);
    ensure(f.iter().all(|&v| close(v, 0.25, 1e-14)), || format!("{f:?}"))?;
    let load = LoadFactors::new(vec![(f.clone(), f)]).map_err(|e| e.to_string())?;
    ensure(!load.is_zero(), || "load vanished".into())
}

const FAST: &[(&str, Check)] = &[
    ("spaces.mesh_nodes", check_meshes),
    ("assembly.closed_forms", check_classical_stiffness),
    ("assembly.stiffness_symmetric", check_stiffness_symmetric),
    ("assembly.load_quadrature", check_load_quadrature),
    ("linalg.toeplitz_fft", check_toeplitz_small),
    ("lowrank.scalar_contractions", check_scalar_contractions),
    ("pgd.rank_one_exactness", check_rank_one_exactness),
    ("problems.dense_oracle", check_dense_oracle),
];

const FULL: &[(&str, Check)] = &[
    ("assembly.spd_random_trials", check_spd_random),
    ("lowrank.energy_random_trials", check_energy_random),
    ("pgd.one_step_identity_32x32", check_one_step_identity),
];

fn run_one(name: &'static str, check: Check, fault: Option<Fault>) -> CheckResult {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(|| check(fault)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    CheckResult {
        name,
        outcome,
        millis: start.elapsed().as_secs_f64() * 1e3,
    }
}

pub fn suite(level: Level) -> Vec<(&'static str, Check)> {
    let mut checks = FAST.to_vec();
    if level == Level::Full {
        checks.extend_from_slice(FULL);
    }
    checks
}

pub fn verify(opts: &VerifyOptions) -> VerifyReport {
    let checks = suite(opts.level);
    let threads = opts.threads.clamp(1, checks.len().max(1));
    let fault = opts.fault;
    let mut slots: Vec<Option<CheckResult>> = vec![None; checks.len()];
    if threads == 1 {
        for (slot, &(name, check)) in slots.iter_mut().zip(&checks) {
            *slot = Some(run_one(name, check, fault));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(&(name, check)) = checks.get(i) else { break };
                    let r = run_one(name, check, fault);
                    results.lock().expect("no poisoned result lock")[i] = Some(r);
                });
            }
        });
    }
    VerifyReport {
        results: slots.into_iter().map(|r| r.expect("every check ran")).collect(),
    }
}
