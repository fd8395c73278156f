//! Result records written by `solve` and the per-point rows written by `path`.

use serde::ser::{Error as _, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;
use slope_newt::{IterRecord, SolveReport};

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A float that serializes with [`fmt_f64`]; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(fmt_f64(self.0))
            .map_err(S::Error::custom)?
            .serialize(s)
    }
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LambdaSource {
    File { path: String },
    Oscar { w1: Num, w2: Num },
    OscarFactor { a: Num, w1: Num, w2: Num },
}

#[derive(Debug, Clone, Serialize)]
pub struct TopEntry {
    pub index: usize,
    pub value: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub instance: String,
    pub m: usize,
    pub n: usize,
    pub algorithm: String,
    pub lambda: LambdaSource,
    pub converged: bool,
    pub obj_primal: Num,
    pub obj_dual: Num,
    pub eta_g: Num,
    pub eta_d: Num,
    pub eta: Num,
    pub nnz999: usize,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub cg_iters_total: usize,
    pub wall_ms: Num,
    pub top_k: Vec<TopEntry>,
    pub x: Vec<Num>,
}

impl ResultRecord {
    pub fn new(
        instance: String,
        lambda: LambdaSource,
        report: &SolveReport,
        top: &[(usize, f64)],
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            instance,
            m: report.y.len(),
            n: report.x.len(),
            algorithm: report.algorithm.as_str().to_string(),
            lambda,
            converged: report.converged,
            obj_primal: Num(report.obj_primal),
            obj_dual: Num(report.obj_dual),
            eta_g: Num(report.eta_g),
            eta_d: Num(report.eta_d),
            eta: Num(report.eta_kkt),
            nnz999: report.nnz999,
            outer_iters: report.outer_iters,
            inner_iters_total: report.inner_iters_total,
            cg_iters_total: report.cg_iters_total,
            wall_ms: Num(report.wall_ms),
            top_k: top
                .iter()
                .map(|&(index, v)| TopEntry { index, value: Num(v) })
                .collect(),
            x: nums(report.x.as_slice()),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Header of the path CSV for a given `k`.
pub fn path_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "w1", "w2", "converged", "obj_primal", "eta", "eta_g", "eta_d", "nnz999",
        "outer_iters", "inner_iters_total", "cg_iters_total", "wall_ms",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 1..=k {
        h.push(format!("top{i}_index"));
        h.push(format!("top{i}_value"));
    }
    h
}

/// One path CSV row; missing top-k slots (k > n) are left empty.
pub fn path_row(w1: f64, w2: f64, report: &SolveReport, top: &[(usize, f64)], k: usize) -> Vec<String> {
    let mut row = vec![
        fmt_f64(w1),
        fmt_f64(w2),
        report.converged.to_string(),
        fmt_f64(report.obj_primal),
        fmt_f64(report.eta_kkt),
        fmt_f64(report.eta_g),
        fmt_f64(report.eta_d),
        report.nnz999.to_string(),
        report.outer_iters.to_string(),
        report.inner_iters_total.to_string(),
        report.cg_iters_total.to_string(),
        fmt_f64(report.wall_ms),
    ];
    for i in 0..k {
        match top.get(i) {
            Some(&(idx, v)) => {
                row.push(idx.to_string());
                row.push(fmt_f64(v));
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
    }
    row
}

pub const TRACE_HEADER: [&str; 8] = [
    "iter", "eta_g", "eta_d", "obj_primal", "step", "residual", "dx_norm", "inner_iters",
];

pub fn trace_row(r: &IterRecord) -> Vec<String> {
    vec![
        r.iter.to_string(),
        fmt_f64(r.eta_g),
        fmt_f64(r.eta_d),
        fmt_f64(r.obj_primal),
        fmt_f64(r.step),
        fmt_f64(r.residual),
        fmt_f64(r.dx_norm),
        r.inner_iters.to_string(),
    ]
}
