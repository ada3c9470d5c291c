//! Convergence reports, mode files and MatrixMarket dumps.
//!
//! Every floating-point number is written with 17 significant digits so that
//! files round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::lowrank::{RankOneMode, SeparableFunction, TensorOperators};
use crate::pgd::IterationRecord;

pub const REPORT_HEADER: [&str; 7] = ["N", "delta_E", "rq", "tau", "sweeps", "theta_hat", "energy_error_sq"];

/// 17 significant digits in scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw_number(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { format_f64(x) } else { "null".to_owned() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

fn raw_array(v: &[f64]) -> Box<RawValue> {
    let body: Vec<String> = v
        .iter()
        .map(|&x| if x.is_finite() { format_f64(x) } else { "null".to_owned() })
        .collect();
    RawValue::from_string(format!("[{}]", body.join(","))).expect("formatted array is valid JSON")
}

#[derive(Serialize)]
struct ModeOut {
    scale: Box<RawValue>,
    p: Box<RawValue>,
    q: Box<RawValue>,
}

#[derive(Serialize)]
struct MeshesOut {
    x: Box<RawValue>,
    y: Box<RawValue>,
}

#[derive(Serialize)]
struct ModesOut {
    alpha_x: Box<RawValue>,
    alpha_y: Box<RawValue>,
    axes: [&'static str; 2],
    meshes: MeshesOut,
    modes: Vec<ModeOut>,
}

/// JSON text of the mode file; `alpha_x`/`meshes.x` describe the first
/// tensor slot and `axes` names both slots.
pub fn modes_json(u: &SeparableFunction, ops: &TensorOperators) -> Result<String> {
    let doc = ModesOut {
        alpha_x: raw_number(ops.x.interval.order.value()),
        alpha_y: raw_number(ops.y.interval.order.value()),
        axes: [ops.x.interval.label.name(), ops.y.interval.label.name()],
        meshes: MeshesOut {
            x: raw_array(ops.x.interval.mesh.nodes()),
            y: raw_array(ops.y.interval.mesh.nodes()),
        },
        modes: u
            .modes()
            .iter()
            .map(|m| ModeOut {
                scale: raw_number(m.scale),
                p: raw_array(&m.p),
                q: raw_array(&m.q),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModeRecord {
    pub scale: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Meshes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModesDocument {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub axes: Vec<String>,
    pub meshes: Meshes,
    pub modes: Vec<ModeRecord>,
}

impl ModesDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_separable(&self) -> Result<SeparableFunction> {
        let nx = self.meshes.x.len().saturating_sub(2);
        let ny = self.meshes.y.len().saturating_sub(2);
        let modes = self
            .modes
            .iter()
            .map(|m| RankOneMode::new(m.p.clone(), m.q.clone(), m.scale))
            .collect();
        SeparableFunction::from_modes(nx, ny, modes)
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// CSV report, one row per accepted greedy step.
pub fn write_report<W: Write>(out: W, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            format_f64(r.delta_e),
            format_f64(r.rq),
            format_f64(r.tau),
            r.sweeps.to_string(),
            optional(r.theta_hat),
            optional(r.energy_error_sq),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_csv(records: &[IterationRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_report(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// One parsed report row; empty diagnostic fields become `None`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    pub rq: f64,
    pub tau: f64,
    pub sweeps: usize,
    pub theta_hat: Option<f64>,
    pub energy_error_sq: Option<f64>,
}

pub fn read_report(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
    Ok(rows)
}

/// `%%MatrixMarket` coordinate file holding the lower triangle.
pub fn matrix_market(m: &SymMatrix) -> String {
    let lower: Vec<(usize, usize, f64)> = m.triplets().into_iter().filter(|&(i, j, _)| i >= j).collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    s.push_str(&format!("{} {} {}\n", m.dim(), m.dim(), lower.len()));
    for (i, j, v) in lower {
        s.push_str(&format!("{} {} {}\n", i + 1, j + 1, format_f64(v)));
    }
    s
}

/// Parses a symmetric coordinate MatrixMarket file into a dense matrix.
pub fn parse_matrix_market(text: &str) -> Result<nalgebra::DMatrix<f64>> {
    let bad = |msg: &str| Error::Config(format!("MatrixMarket: {msg}"));
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("missing size line"))?;
    let sizes: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad size line")))
        .collect::<Result<_>>()?;
    let &[rows, cols, _] = sizes.as_slice() else {
        return Err(bad("size line needs three integers"));
    };
    let mut out = nalgebra::DMatrix::zeros(rows, cols);
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad("entry line needs three fields"));
        }
        let i: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
        let j: usize = t[1].parse().map_err(|_| bad("bad column index"))?;
        let v: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
        out[(i - 1, j - 1)] = v;
        out[(j - 1, i - 1)] = v;
    }
    Ok(out)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
