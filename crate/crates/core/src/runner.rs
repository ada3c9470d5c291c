//! End-to-end `solve`: build the problem, run the greedy solver, write the
//! report, summary and modes files.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::RunConfig;
use crate::error::Result;
use crate::io::{format_f64, modes_json, report_csv, write_text};
use crate::pgd::{greedy_solve, GreedyOutcome, GreedyStatus};
use crate::problems::{build_problem, Problem};

impl GreedyStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            GreedyStatus::Converged => 0,
            GreedyStatus::Stagnated => 2,
            GreedyStatus::MaxModes => 3,
        }
    }
}

pub struct RunOutput {
    pub problem: Problem,
    pub outcome: GreedyOutcome,
    pub report: String,
    pub summary: String,
    pub modes: String,
    pub wall_time_ms: f64,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.outcome.status.exit_code()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    status: &'static str,
    modes: usize,
    #[serde(rename = "final_delta_E")]
    final_delta_e: Box<RawValue>,
    energy: Box<RawValue>,
    final_energy_error_sq: Option<Box<RawValue>>,
    monotonicity_violations: usize,
    config: &'a RunConfig,
    wall_time_ms: Box<RawValue>,
}

fn raw(x: f64) -> Box<RawValue> {
    RawValue::from_string(if x.is_finite() { format_f64(x) } else { "null".into() }).expect("valid JSON number")
}

/// Runs the solve without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = build_problem(&cfg.problem)?;
    let mut als = cfg.als.clone();
    als.seed = cfg.seed;
    let outcome = greedy_solve(&problem.ops, &problem.load, &cfg.greedy, &als, cfg.diagnostics)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let report = report_csv(&outcome.records)?;
    let modes = modes_json(&outcome.solution, &problem.ops)?;
    let summary = Summary {
        status: outcome.status.as_str(),
        modes: outcome.solution.len(),
        final_delta_e: raw(outcome.final_delta_e),
        energy: raw(outcome.energy),
        final_energy_error_sq: outcome.final_energy_error_sq.map(raw),
        monotonicity_violations: outcome.monotonicity_violations(),
        config: cfg,
        wall_time_ms: raw(wall_time_ms),
    };
    let mut summary = serde_json::to_string_pretty(&summary)?;
    summary.push('\n');
    Ok(RunOutput {
        problem,
        outcome,
        report,
        summary,
        modes,
        wall_time_ms,
    })
}

/// Runs the solve and writes the three output files; relative output paths
/// resolve against `base`.
pub fn run(cfg: &RunConfig, base: &Path) -> Result<RunOutput> {
    let out = execute(cfg)?;
    let paths = cfg.output.relative_to(base);
    write_text(&paths.report, &out.report)?;
    write_text(&paths.summary, &out.summary)?;
    write_text(&paths.modes, &out.modes)?;
    log::info!(
        "{} after {} modes in {:.1} ms",
        out.outcome.status.as_str(),
        out.outcome.solution.len(),
        out.wall_time_ms
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_report;
    use crate::problems::LoadSpec;

    #[test]
    fn zero_load_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml_with_overrides("", &["problem.n_x=8", "problem.n_y=8", "problem.load.kind=constant", "problem.load.value=0.0"]).unwrap();
        let out = run(&cfg, dir.path()).unwrap();
        assert_eq!(out.exit_code(), 0);
        let report = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
        assert_eq!(report, "N,delta_E,rq,tau,sweeps,theta_hat,energy_error_sq\n");
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
        assert_eq!(summary["status"], "converged");
        assert_eq!(summary["modes"], 0);
    }

    #[test]
    fn manufactured_run_has_one_row() {
        let mut cfg = RunConfig::default();
        cfg.problem.n_x = 12;
        cfg.problem.n_y = 12;
        cfg.problem.load = LoadSpec::Manufactured { x_wavenumber: 1, y_wavenumber: 1 };
        cfg.diagnostics.theta = true;
        cfg.diagnostics.dual_norm = true;
        let out = execute(&cfg).unwrap();
        let rows = read_report(&out.report).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].theta_hat.unwrap() >= 1.0 - 1e-8);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(GreedyStatus::Converged.exit_code(), 0);
        assert_eq!(GreedyStatus::Stagnated.exit_code(), 2);
        assert_eq!(GreedyStatus::MaxModes.exit_code(), 3);
        let mut cfg = RunConfig::default();
        cfg.problem.n_x = 8;
        cfg.problem.n_y = 8;
        cfg.greedy.max_modes = 1;
        cfg.greedy.eps = 1e-10;
        let out = execute(&cfg).unwrap();
        assert_eq!(out.exit_code(), 3);
        let summary: serde_json::Value = serde_json::from_str(&out.summary).unwrap();
        assert_eq!(summary["modes"], read_report(&out.report).unwrap().len());
    }
}
