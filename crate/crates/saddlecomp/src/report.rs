//! Machine-readable solve reports and the append-only run log.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use saddlecomp_core::{Diagnostic, SolveReport, VariableDecl};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticJson {
    pub code: String,
    pub path: String,
    pub message: String,
}

impl From<&Diagnostic> for DiagnosticJson {
    fn from(d: &Diagnostic) -> Self {
        DiagnosticJson { code: d.code.as_str().into(), path: d.path_string(), message: d.message.clone() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VariableJson {
    pub name: String,
    pub shape: Vec<usize>,
    /// Column-major flattened value.
    pub value: Vec<f64>,
}

/// `solve --json` output. Everything except `timestamp` is a function of
/// the input file and options.
#[derive(Clone, Debug, Serialize)]
pub struct JsonReport {
    pub input_sha256: String,
    pub status: String,
    pub value: Option<f64>,
    pub gap: Option<f64>,
    pub tolerance: f64,
    pub v_plus: Option<f64>,
    pub v_minus: Option<f64>,
    pub solver_status: Option<String>,
    pub variables: Vec<VariableJson>,
    pub diagnostics: Vec<DiagnosticJson>,
    pub message: String,
    pub timestamp: f64,
}

impl JsonReport {
    pub fn new(input_sha256: String, r: &SolveReport, variables: &[VariableDecl]) -> Self {
        JsonReport {
            input_sha256,
            status: r.status.as_str().into(),
            value: finite(r.value),
            gap: finite(r.gap),
            tolerance: r.tolerance,
            v_plus: r.v_plus,
            v_minus: r.v_minus,
            solver_status: r.solver_status.map(|s| s.as_str().into()),
            variables: variables
                .iter()
                .filter_map(|v| {
                    r.value_of(v).map(|x| VariableJson { name: v.name().into(), shape: v.shape().dims(), value: x.to_vec() })
                })
                .collect(),
            diagnostics: r.diagnostics.iter().map(DiagnosticJson::from).collect(),
            message: r.message.clone(),
            timestamp: unix_time(),
        }
    }
}

/// One line of the run log.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub input_sha256: String,
    pub timestamp: f64,
    pub status: String,
    pub value: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn new(input_sha256: String, status: &str, value: f64, gap: f64, wall_time_s: f64) -> Self {
        RunRecord {
            input_sha256,
            timestamp: unix_time(),
            status: status.into(),
            value: finite(value),
            gap: finite(gap),
            wall_time_s,
        }
    }

    /// Append as one JSON line.
    pub fn append_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(self).expect("run record serializes");
        writeln!(f, "{line}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn run_log_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        RunRecord::new("aa".into(), "Solved", 1.5, 0.0, 0.01).append_to(&path).unwrap();
        RunRecord::new("bb".into(), "SolverFailure", f64::NAN, f64::NAN, 0.02).append_to(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["value"], 1.5);
        // non-finite numbers become null
        assert!(lines[1]["value"].is_null());
        assert_eq!(lines[1]["input_sha256"], "bb");
    }
}
