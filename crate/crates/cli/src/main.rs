use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use conformable_pgd::config::RunConfig;
use conformable_pgd::io::{matrix_market, write_text};
use conformable_pgd::problems::build_problem;
use conformable_pgd::runner;
use conformable_pgd::verify::{self, Fault, Level, VerifyOptions};

#[derive(Parser)]
#[command(name = "cpgd", version, about = "Greedy rank-one solver for conformable fractional problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the greedy solver and write report, summary and modes files.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, e.g. `--set greedy.eps=1e-6`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the built-in invariant suites.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Dump the assembled 1-D operator pairs as MatrixMarket files.
    ExportMatrices {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Symmetry,
}

fn solve(config: PathBuf, overrides: Vec<String>) -> anyhow::Result<u8> {
    let cfg = RunConfig::load(&config, &overrides)?;
    let out = runner::run(&cfg, &std::env::current_dir()?)?;
    eprintln!(
        "{}: {} modes, final delta_E {:.3e}",
        out.outcome.status.as_str(),
        out.outcome.solution.len(),
        out.outcome.final_delta_e
    );
    Ok(out.exit_code() as u8)
}

fn run_verify(level: LevelArg, fault: Option<FaultArg>) -> u8 {
    let mut opts = VerifyOptions::new(match level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    });
    opts.fault = fault.map(|FaultArg::Symmetry| Fault::AsymmetricStiffness);
    let report = verify::verify(&opts);
    for r in &report.results {
        match &r.outcome {
            Ok(()) => println!("ok    {:<36} {:>9.1} ms", r.name, r.millis),
            Err(e) => println!("FAIL  {:<36} {:>9.1} ms  {e}", r.name, r.millis),
        }
    }
    match report.first_failure() {
        None => 0,
        Some(f) => {
            eprintln!("first failing invariant: {}", f.name);
            1
        }
    }
}

fn export(config: PathBuf, out: PathBuf, overrides: Vec<String>) -> anyhow::Result<u8> {
    let cfg = RunConfig::load(&config, &overrides)?;
    let problem = build_problem(&cfg.problem)?;
    for pair in [&problem.ops.x, &problem.ops.y] {
        let axis = pair.interval.label.name();
        for (kind, m) in [("stiffness", &pair.stiffness), ("mass", &pair.mass)] {
            let path = out.join(format!("{kind}_{axis}.mtx"));
            write_text(&path, &matrix_market(m)).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, overrides } => solve(config, overrides),
        Command::Verify { level, inject_fault } => Ok(run_verify(level, inject_fault)),
        Command::ExportMatrices { config, out, overrides } => export(config, out, overrides),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
