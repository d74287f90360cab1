//! JSON export and import of cone programs.

use serde::{Deserialize, Serialize};

use saddlecomp_core::cone::{Triplets, VarRange};
use saddlecomp_core::{Cone, ConeKind, ConeProgram};

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct ConeJson {
    kind: String,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RangeJson {
    name: String,
    start: usize,
    len: usize,
}

/// On-disk form. `sense` says how the reported value relates to the cone
/// program objective: `maximize` means value = -(cᵀz + offset).
#[derive(Serialize, Deserialize)]
struct ProgramJson {
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: MatrixJson,
    b: Vec<f64>,
    cones: Vec<ConeJson>,
    var_index: Vec<RangeJson>,
    #[serde(default)]
    offset: f64,
    #[serde(default = "default_sense")]
    sense: String,
}

fn default_sense() -> String {
    "minimize".into()
}

/// A cone program with the sign convention of its reported value.
#[derive(Clone, Debug)]
pub struct ProgramFile {
    pub program: ConeProgram,
    pub maximize: bool,
}

impl ProgramFile {
    pub fn value(&self, objective: f64) -> f64 {
        if self.maximize {
            -objective
        } else {
            objective
        }
    }
}

pub fn to_json(p: &ConeProgram, maximize: bool) -> String {
    let doc = ProgramJson {
        c: p.c.clone(),
        a: MatrixJson {
            rows: p.a.rows.clone(),
            cols: p.a.cols.clone(),
            vals: p.a.vals.clone(),
            shape: [p.a.shape.0, p.a.shape.1],
        },
        b: p.b.clone(),
        cones: p.cones.iter().map(|k| ConeJson { kind: k.kind.as_str().into(), dim: k.dim }).collect(),
        var_index: p
            .var_index
            .iter()
            .map(|r| RangeJson { name: r.name.clone(), start: r.start, len: r.len })
            .collect(),
        offset: p.offset,
        sense: if maximize { "maximize" } else { "minimize" }.into(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("cone program serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<ProgramFile, String> {
    let doc: ProgramJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut cones = Vec::with_capacity(doc.cones.len());
    for k in doc.cones {
        let kind = ConeKind::parse(&k.kind).ok_or_else(|| format!("unknown cone kind `{}`", k.kind))?;
        cones.push(Cone { kind, dim: k.dim });
    }
    let maximize = match doc.sense.as_str() {
        "minimize" => false,
        "maximize" => true,
        other => return Err(format!("unknown sense `{other}`")),
    };
    let a = Triplets { rows: doc.a.rows, cols: doc.a.cols, vals: doc.a.vals, shape: (doc.a.shape[0], doc.a.shape[1]) };
    if a.rows.len() != a.cols.len() || a.rows.len() != a.vals.len() {
        return Err("A: rows, cols and vals must have equal length".into());
    }
    let program = ConeProgram {
        c: doc.c,
        offset: doc.offset,
        a,
        b: doc.b,
        cones,
        var_index: doc.var_index.into_iter().map(|r| VarRange { name: r.name, start: r.start, len: r.len }).collect(),
    };
    program.validate()?;
    Ok(ProgramFile { program, maximize })
}

/// True if `text` looks like a cone program rather than a problem file.
pub fn looks_like_program(value: &serde_json::Value) -> bool {
    value.get("cones").is_some() && value.get("A").is_some()
}

/// Cone inventory such as `zero(2) nonneg(4) soc(3)`.
pub fn inventory(p: &ConeProgram) -> String {
    let parts: Vec<String> = p.cones.iter().map(|k| format!("{}({})", k.kind.as_str(), k.dim)).collect();
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{"c": [1.0], "A": {"rows": [0], "cols": [0], "vals": [-1.0], "shape": [1, 1]},
        "b": [-2.0], "cones": [{"kind": "nonneg", "dim": 1}], "var_index": [{"name": "x", "start": 0, "len": 1}]}"#;

    #[test]
    fn optional_fields_default() {
        let p = from_json(TINY).unwrap();
        assert!(!p.maximize);
        assert_eq!(p.program.offset, 0.0);
        assert_eq!(p.value(3.0), 3.0);
        assert_eq!(inventory(&p.program), "nonneg(1)");
    }

    #[test]
    fn round_trip_keeps_sense() {
        let p = from_json(TINY).unwrap();
        let back = from_json(&to_json(&p.program, true)).unwrap();
        assert!(back.maximize);
        assert_eq!(back.value(3.0), -3.0);
        assert_eq!(back.program.a, p.program.a);
    }

    #[test]
    fn bad_documents() {
        assert!(from_json(&TINY.replace("nonneg", "cube")).unwrap_err().contains("cube"));
        assert!(from_json(&TINY.replace("\"vals\": [-1.0]", "\"vals\": []")).is_err());
        let v: serde_json::Value = serde_json::from_str(TINY).unwrap();
        assert!(looks_like_program(&v));
        assert!(!looks_like_program(&serde_json::json!({"variables": []})));
    }
}
