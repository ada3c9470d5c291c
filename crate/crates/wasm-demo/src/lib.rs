//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string, so the page needs no bundler or generated typings beyond the
//! `wasm-bindgen` glue.

use conformable_pgd::assembly::{assemble_fem_pair, weighted_element_integral};
use conformable_pgd::pgd::{greedy_solve, AlsConfig, Diagnostics, GreedyConfig};
use conformable_pgd::problems::{build_problem, Discretization, LoadSpec, ProblemSpec};
use conformable_pgd::spaces::{make_graded_mesh, Axis, FractionalInterval, FractionalOrder};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_ELEMENTS: usize = 256;

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn error(e: impl std::fmt::Display) -> String {
    json!({ "error": e.to_string() }).to_string()
}

fn load_spec(load: &str) -> Result<LoadSpec, String> {
    match load {
        "constant" => Ok(LoadSpec::Constant { value: 1.0 }),
        "manufactured" => Ok(LoadSpec::Manufactured {
            x_wavenumber: 1,
            y_wavenumber: 1,
        }),
        "manufactured-2-3" => Ok(LoadSpec::Manufactured {
            x_wavenumber: 2,
            y_wavenumber: 3,
        }),
        other => Err(format!("unknown load `{other}`")),
    }
}

/// Runs the greedy solver on the fractional Poisson problem with `n`
/// elements per axis. Returns the per-step history, the assembled field on
/// the full node grid (boundary zeros included) and the first factors.
pub fn solve_poisson(
    alpha_x: f64,
    alpha_y: f64,
    n: usize,
    grunwald: bool,
    load: &str,
    eps: f64,
    max_modes: usize,
) -> Result<Value, String> {
    if !(2..=MAX_ELEMENTS).contains(&n) {
        return Err(format!("n must lie in [2, {MAX_ELEMENTS}]"));
    }
    let spec = ProblemSpec {
        alpha_y: Some(alpha_y),
        discretization: if grunwald {
            Discretization::Grunwald
        } else {
            Discretization::Fem
        },
        load: load_spec(load)?,
        ..ProblemSpec::poisson(alpha_x, n)
    };
    let problem = build_problem(&spec).map_err(|e| e.to_string())?;
    let greedy = GreedyConfig {
        eps,
        max_modes,
        ..GreedyConfig::default()
    };
    greedy.validate().map_err(|e| e.to_string())?;
    let out = greedy_solve(&problem.ops, &problem.load, &greedy, &AlsConfig::default(), Diagnostics::all())
        .map_err(|e| e.to_string())?;

    let u = out.solution.to_dense();
    let xs = problem.ops.x.interval.mesh.nodes().to_vec();
    let ys = problem.ops.y.interval.mesh.nodes().to_vec();
    let field: Vec<Vec<f64>> = (0..xs.len())
        .map(|i| {
            (0..ys.len())
                .map(|j| {
                    let interior = i > 0 && j > 0 && i + 1 < xs.len() && j + 1 < ys.len();
                    if interior {
                        u[(i - 1, j - 1)]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let steps: Vec<Value> = out
        .records
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "delta_e": finite(r.delta_e),
                "sweeps": r.sweeps,
                "theta": r.theta_hat.map_or(Value::Null, finite),
                "energy_error_sq": r.energy_error_sq.map_or(Value::Null, finite),
            })
        })
        .collect();
    let modes: Vec<Value> = out
        .solution
        .modes()
        .iter()
        .take(4)
        .map(|m| json!({ "scale": m.scale, "p": m.p, "q": m.q }))
        .collect();
    Ok(json!({
        "status": out.status.as_str(),
        "modes": out.solution.len(),
        "energy": finite(out.energy),
        "final_energy_error_sq": out.final_energy_error_sq.map_or(Value::Null, finite),
        "steps": steps,
        "x": xs,
        "y": ys,
        "field": field,
        "leading_modes": modes,
    }))
}

/// Mesh nodes, the weight `x^(1-α)` and the weighted element integrals of
/// one axis, with the diagonal of the assembled stiffness.
pub fn weight_profile(alpha: f64, n: usize, grading: f64) -> Result<Value, String> {
    if !(2..=MAX_ELEMENTS).contains(&n) {
        return Err(format!("n must lie in [2, {MAX_ELEMENTS}]"));
    }
    let order = FractionalOrder::new(alpha).map_err(|e| e.to_string())?;
    let mesh = make_graded_mesh(1.0, n, grading).map_err(|e| e.to_string())?;
    let nodes = mesh.nodes().to_vec();
    let interval = FractionalInterval::new(order, mesh, Axis::X);
    let pair = assemble_fem_pair(&interval).map_err(|e| e.to_string())?;
    let integrals: Vec<f64> = nodes
        .windows(2)
        .map(|w| weighted_element_integral(w[0], w[1], alpha))
        .collect();
    let weight: Vec<f64> = nodes.iter().map(|&x| order.weight(x)).collect();
    let diagonal: Vec<f64> = (0..interval.dofs()).map(|i| pair.stiffness.entry(i, i)).collect();
    Ok(json!({
        "nodes": nodes,
        "weight": weight,
        "element_integrals": integrals,
        "stiffness_diagonal": diagonal,
    }))
}

#[wasm_bindgen]
pub fn solve(alpha_x: f64, alpha_y: f64, n: usize, grunwald: bool, load: &str, eps: f64, max_modes: usize) -> String {
    solve_poisson(alpha_x, alpha_y, n, grunwald, load, eps, max_modes)
        .map(|v| v.to_string())
        .unwrap_or_else(error)
}

#[wasm_bindgen]
pub fn profile(alpha: f64, n: usize, grading: f64) -> String {
    weight_profile(alpha, n, grading)
        .map(|v| v.to_string())
        .unwrap_or_else(error)
}
