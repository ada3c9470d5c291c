use std::path::Path;
use std::process::{Command, Output};

fn cpgd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpgd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("cpgd runs")
}

fn write_config(dir: &Path, text: &str) {
    std::fs::write(dir.join("run.toml"), text).unwrap();
}

#[test]
fn solve_exit_codes_follow_status() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[problem]\nn_x = 12\nn_y = 12\n");
    let out = cpgd(dir.path(), &["solve", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.csv", "summary.json", "modes.json"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }

    let out = cpgd(
        dir.path(),
        &["solve", "--config", "run.toml", "--set", "greedy.max_modes=1", "--set", "greedy.eps=1e-12"],
    );
    assert_eq!(out.status.code(), Some(3));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "max_modes");
    assert_eq!(summary["modes"], 1);
    assert_eq!(summary["config"]["greedy"]["max_modes"], 1);
}

#[test]
fn report_columns_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "[problem]\nn_x = 32\nn_y = 32\n[greedy]\neps = 1e-3\n[diagnostics]\ntheta = true\ndual_norm = true\n",
    );
    let out = cpgd(dir.path(), &["solve", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("N,delta_E,rq,tau,sweeps,theta_hat,energy_error_sq"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty());
    for w in rows.windows(2) {
        assert!(w[1][6] < w[0][6], "energy error must decrease");
    }
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (k + 1) as f64);
        assert!(r[5] > 0.0 && r[5] <= 1.0 + 1e-8);
    }
}

#[test]
fn bad_config_reports_line_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[greedy]\neps = 1e-4\nmax_mode = 3\n");
    let out = cpgd(dir.path(), &["solve", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("max_mode"), "{err}");

    let out = cpgd(dir.path(), &["solve", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));

    write_config(dir.path(), "[problem]\nalpha_x = 1.5\n");
    let out = cpgd(dir.path(), &["solve", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_fast_passes_and_fault_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpgd(dir.path(), &["verify", "--level", "fast"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    let out = cpgd(dir.path(), &["verify", "--level", "fast", "--inject-fault", "symmetry"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("first failing invariant: assembly.stiffness_symmetric"), "{err}");
}

#[test]
fn export_matrices_writes_market_files() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[problem]\nkind = \"spacetime\"\nn_x = 6\nn_y = 5\n");
    let out = cpgd(dir.path(), &["export-matrices", "--config", "run.toml", "--out", "mats"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for (name, n) in [("stiffness_t", 4), ("mass_t", 4), ("stiffness_x", 5), ("mass_x", 5)] {
        let text = std::fs::read_to_string(dir.path().join("mats").join(format!("{name}.mtx"))).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"), "{name}");
        let size = text.lines().find(|l| !l.starts_with('%')).unwrap();
        assert!(size.starts_with(&format!("{n} {n} ")), "{name}: {size}");
    }
}
