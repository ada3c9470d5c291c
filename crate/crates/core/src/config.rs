//! Run configuration: a TOML file with `[problem]`, `[greedy]`, `[als]`,
//! `[diagnostics]` and `[output]` sections, plus `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgd::{AlsConfig, Diagnostics, GreedyConfig, DEFAULT_SEED};
use crate::problems::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub report: PathBuf,
    pub summary: PathBuf,
    pub modes: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            report: PathBuf::from("out/report.csv"),
            summary: PathBuf::from("out/summary.json"),
            modes: PathBuf::from("out/modes.json"),
        }
    }
}

impl OutputPaths {
    /// Resolves relative paths against `base`.
    pub fn relative_to(&self, base: &Path) -> OutputPaths {
        let fix = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        OutputPaths {
            report: fix(&self.report),
            summary: fix(&self.summary),
            modes: fix(&self.modes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the random ALS fallback; overrides `als.seed`.
    pub seed: u64,
    pub problem: ProblemSpec,
    pub greedy: GreedyConfig,
    pub als: AlsConfig,
    pub diagnostics: Diagnostics,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            problem: ProblemSpec::default(),
            greedy: GreedyConfig::default(),
            als: AlsConfig::default(),
            diagnostics: Diagnostics::default(),
            output: OutputPaths::default(),
        }
    }
}

fn parse_error(source: &str, e: &toml::de::Error) -> Error {
    let location = e
        .span()
        .map(|span| {
            let line = source[..span.start.min(source.len())].matches('\n').count() + 1;
            format!("line {line}: ")
        })
        .unwrap_or_default();
    Error::Config(format!("{location}{}", e.message()))
}

/// Parses `value` as a TOML scalar or array, falling back to a bare string.
fn override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(value.to_owned()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set {assignment}: expected key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("--set {assignment}: empty key segment")));
    }
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("--set {assignment}: `{p}` is not a section")))?;
    }
    node.insert(last.to_string(), override_value(value.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides::<&str>(text, &[])
    }

    /// Parses `text`, then applies `key=value` overrides with dotted keys
    /// such as `greedy.eps=1e-6`.
    pub fn from_toml_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        if !overrides.is_empty() {
            let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
            for o in overrides {
                apply_override(&mut table, o.as_ref())?;
            }
            let joined: Vec<&str> = overrides.iter().map(|o| o.as_ref()).collect();
            cfg = RunConfig::deserialize(toml::Value::Table(table))
                .map_err(|e| Error::Config(format!("after --set {}: {}", joined.join(" "), e.message())))?;
        }
        cfg.als.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&text, overrides)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config: "))))
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.greedy.validate()?;
        self.als.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes to TOML")
    }
}
