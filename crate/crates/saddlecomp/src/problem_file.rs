//! Declarative problem files.
//!
//! A problem file is a JSON object:
//!
//! ```json
//! {
//!   "variables": [{"name": "x", "shape": [2], "attrs": ["nonneg"]}],
//!   "expressions": {"f": ["inner", "x", ["@", [[1, 2], [3, 1]], "y"]]},
//!   "objective": {"minimize_maximize": "f"},
//!   "constraints": [["==", ["sum", "x"], 1]],
//!   "roles": {"cvx": ["x"], "ccv": ["y"]},
//!   "solver": {"tol": 1e-6}
//! }
//! ```
//!
//! Expressions are prefix arrays `[op, arg, ...]`. A string names a variable
//! or an entry of `expressions`; a number is a scalar constant; an array of
//! numbers is a vector and an array of number arrays is a matrix given by
//! rows. Constraints are `["<=" | ">=" | "==", lhs, rhs]`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;
use serde_json::Value;

use saddlecomp_core::atoms::{self, DcpAtom};
use saddlecomp_core::expr::ExprError;
use saddlecomp_core::problem::ProblemError;
use saddlecomp_core::{
    Constraint, Diagnostic, Expr, Matrix, MinimizeMaximize, Objective, SaddleOptions, SaddlePointProblem, SaddleProblem, Shape,
    SolverOptions, VarAttrs, VariableDecl,
};

/// Parse failure. `location` is `line L, column C` for JSON syntax errors
/// and a path such as `objective.minimize[2]` otherwise. A saddle extremum
/// that fails the compliance rules is reported with its diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub location: String,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError { location: location.into(), message: message.into(), diagnostics: Vec::new() }
    }

    /// True when the file parsed but a saddle extremum is not compliant.
    pub fn is_compliance(&self) -> bool {
        !self.diagnostics.is_empty()
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(path: &str, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::new(if path.is_empty() { "<root>" } else { path }, msg))
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    tol: Option<f64>,
    abs_floor: Option<f64>,
    tol_feas: Option<f64>,
    tol_gap_abs: Option<f64>,
    tol_gap_rel: Option<f64>,
    max_iter: Option<u32>,
    verbose: Option<bool>,
}

impl SolverSection {
    fn apply(&self) -> SaddleOptions {
        let d = SaddleOptions::default();
        let s = SolverOptions::default();
        SaddleOptions {
            tol: self.tol.unwrap_or(d.tol),
            abs_floor: self.abs_floor.unwrap_or(d.abs_floor),
            solver: SolverOptions {
                tol_feas: self.tol_feas.unwrap_or(s.tol_feas),
                tol_gap_abs: self.tol_gap_abs.unwrap_or(s.tol_gap_abs),
                tol_gap_rel: self.tol_gap_rel.unwrap_or(s.tol_gap_rel),
                max_iter: self.max_iter.unwrap_or(s.max_iter),
                verbose: self.verbose.unwrap_or(s.verbose),
            },
        }
    }
}

/// The problem described by a file.
#[derive(Clone, Debug)]
pub enum FileProblem {
    Saddle(SaddlePointProblem),
    Convex(SaddleProblem),
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    /// Variables in declaration order.
    pub variables: Vec<VariableDecl>,
    pub problem: FileProblem,
    pub options: SaddleOptions,
}

impl ProblemSpec {
    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name() == name)
    }
}

/// Parse a problem file from text.
pub fn parse(text: &str) -> Result<ProblemSpec, ParseError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ParseError::new(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    parse_value(&doc)
}

pub fn parse_value(doc: &Value) -> Result<ProblemSpec, ParseError> {
    let Some(obj) = doc.as_object() else {
        return err("", "a problem file must be a JSON object");
    };
    for key in obj.keys() {
        if !["variables", "expressions", "objective", "constraints", "roles", "solver"].contains(&key.as_str()) {
            return err(key, format!("unknown section `{key}`"));
        }
    }
    let mut p = Parser { vars: BTreeMap::new(), order: Vec::new(), named: BTreeMap::new(), cache: BTreeMap::new() };
    if let Some(vars) = obj.get("variables") {
        p.parse_variables(vars)?;
    }
    if let Some(exprs) = obj.get("expressions") {
        let Some(map) = exprs.as_object() else {
            return err("expressions", "expected an object of named expressions");
        };
        for (name, v) in map {
            if p.vars.contains_key(name) {
                return err(&format!("expressions.{name}"), format!("`{name}` is already a variable"));
            }
            p.named.insert(name.clone(), v.clone());
        }
    }
    let options = match obj.get("solver") {
        Some(v) => serde_json::from_value::<SolverSection>(v.clone())
            .map_err(|e| ParseError::new("solver", e.to_string()))?
            .apply(),
        None => SaddleOptions::default(),
    };
    let constraints = match obj.get("constraints") {
        Some(v) => p.constraint_list(v, "constraints")?,
        None => Vec::new(),
    };
    let Some(objective) = obj.get("objective") else {
        return err("objective", "missing objective");
    };
    let Some(omap) = objective.as_object().filter(|m| m.len() == 1) else {
        return err("objective", "expected one of {\"minimize\": e}, {\"maximize\": e}, {\"minimize_maximize\": e}");
    };
    let (sense, body) = omap.iter().next().unwrap();
    let path = format!("objective.{sense}");
    let e = p.expr(body, &path, &mut Vec::new())?;
    if !e.shape().is_scalar() {
        return err(&path, "objective must be scalar");
    }
    let roles = obj.get("roles");
    let problem = match sense.as_str() {
        "minimize_maximize" => {
            let (cvx, ccv) = p.roles(roles)?;
            FileProblem::Saddle(SaddlePointProblem::new(MinimizeMaximize::new(e), constraints).with_roles(cvx, ccv))
        }
        "minimize" | "maximize" => {
            if roles.is_some() {
                return err("roles", "roles only apply to minimize_maximize objectives");
            }
            let o = if sense == "minimize" { Objective::Minimize(e) } else { Objective::Maximize(e) };
            FileProblem::Convex(SaddleProblem::new(o, constraints))
        }
        other => return err("objective", format!("unknown objective sense `{other}`")),
    };
    Ok(ProblemSpec { variables: p.order, problem, options })
}

struct Parser {
    vars: BTreeMap<String, VariableDecl>,
    order: Vec<VariableDecl>,
    named: BTreeMap<String, Value>,
    cache: BTreeMap<String, Expr>,
}

fn at(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn lift(path: &str, r: Result<Expr, ExprError>) -> Result<Expr, ParseError> {
    r.map_err(|e| ParseError::new(path, e.to_string()))
}

impl Parser {
    fn parse_variables(&mut self, v: &Value) -> Result<(), ParseError> {
        let Some(list) = v.as_array() else {
            return err("variables", "expected a list");
        };
        for (i, item) in list.iter().enumerate() {
            let path = at("variables", i);
            let Some(name) = item.get("name").and_then(Value::as_str) else {
                return err(&path, "variable needs a string `name`");
            };
            if self.vars.contains_key(name) {
                return err(&path, format!("duplicate variable `{name}`"));
            }
            let dims: Vec<usize> = match item.get("shape") {
                None => Vec::new(),
                Some(Value::Array(d)) => {
                    let mut out = Vec::new();
                    for x in d {
                        match x.as_u64() {
                            Some(n) => out.push(n as usize),
                            None => return err(&format!("{path}.shape"), "dimensions must be positive integers"),
                        }
                    }
                    out
                }
                Some(_) => return err(&format!("{path}.shape"), "expected a list of dimensions"),
            };
            let shape = Shape::from_dims(&dims).map_err(|e| ParseError::new(format!("{path}.shape"), e.to_string()))?;
            let mut attrs = VarAttrs::NONE;
            if let Some(a) = item.get("attrs") {
                let Some(list) = a.as_array() else {
                    return err(&format!("{path}.attrs"), "expected a list");
                };
                for x in list {
                    match x.as_str() {
                        Some("nonneg") => attrs.nonneg = true,
                        Some("psd") => attrs.psd = true,
                        Some("symmetric") => attrs.symmetric = true,
                        Some("local") => attrs.local = true,
                        _ => return err(&format!("{path}.attrs"), format!("unknown attribute {x}")),
                    }
                }
            }
            let decl = VariableDecl::new(name, shape, attrs).map_err(|e| ParseError::new(path.clone(), e.to_string()))?;
            self.vars.insert(name.to_string(), decl.clone());
            self.order.push(decl);
        }
        Ok(())
    }

    fn roles(&self, v: Option<&Value>) -> Result<(Vec<VariableDecl>, Vec<VariableDecl>), ParseError> {
        let mut out = (Vec::new(), Vec::new());
        let Some(v) = v else { return Ok(out) };
        let Some(map) = v.as_object() else {
            return err("roles", "expected {\"cvx\": [...], \"ccv\": [...]}");
        };
        for (key, list) in map {
            let target = match key.as_str() {
                "cvx" => &mut out.0,
                "ccv" => &mut out.1,
                _ => return err(&format!("roles.{key}"), "expected `cvx` or `ccv`"),
            };
            let Some(list) = list.as_array() else {
                return err(&format!("roles.{key}"), "expected a list of variable names");
            };
            for (i, name) in list.iter().enumerate() {
                let path = at(&format!("roles.{key}"), i);
                match name.as_str().and_then(|n| self.vars.get(n)) {
                    Some(d) => target.push(d.clone()),
                    None => return err(&path, format!("unknown variable {name}")),
                }
            }
        }
        Ok(out)
    }

    fn constraint_list(&mut self, v: &Value, path: &str) -> Result<Vec<Constraint>, ParseError> {
        let Some(list) = v.as_array() else {
            return err(path, "expected a list of constraints");
        };
        list.iter().enumerate().map(|(i, c)| self.constraint(c, &at(path, i))).collect()
    }

    fn constraint(&mut self, v: &Value, path: &str) -> Result<Constraint, ParseError> {
        let Some([op, lhs, rhs]) = v.as_array().map(Vec::as_slice) else {
            return err(path, "constraints have the form [\"<=\" | \">=\" | \"==\", lhs, rhs]");
        };
        let mut stack = Vec::new();
        let l = self.expr(lhs, &at(path, 1), &mut stack)?;
        let r = self.expr(rhs, &at(path, 2), &mut stack)?;
        let size_ok = l.size() == r.size() || l.shape().is_scalar() || r.shape().is_scalar();
        if !size_ok {
            return err(path, format!("shape mismatch: {:?} vs {:?}", l.shape(), r.shape()));
        }
        match op.as_str() {
            Some("<=") => Ok(l.le(&r)),
            Some(">=") => Ok(l.ge(&r)),
            Some("==") => Ok(l.equals(&r)),
            _ => err(&at(path, 0), format!("unknown relation {op}")),
        }
    }

    fn constant(&self, v: &Value, path: &str) -> Result<Option<Expr>, ParseError> {
        match v {
            Value::Number(n) => Ok(Some(Expr::constant(n.as_f64().unwrap()))),
            Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_number) => {
                let vals: Vec<f64> = items.iter().map(|x| x.as_f64().unwrap()).collect();
                Ok(Some(Expr::vector(&vals)))
            }
            Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_array) => {
                let mut rows: Vec<Vec<f64>> = Vec::new();
                for (i, r) in items.iter().enumerate() {
                    let r = r.as_array().unwrap();
                    if r.is_empty() || !r.iter().all(Value::is_number) {
                        return err(&at(path, i), "matrix rows must be non-empty lists of numbers");
                    }
                    if !rows.is_empty() && rows[0].len() != r.len() {
                        return err(&at(path, i), "matrix rows must have equal length");
                    }
                    rows.push(r.iter().map(|x| x.as_f64().unwrap()).collect());
                }
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                Ok(Some(Expr::matrix(&Matrix::from_rows(&refs))))
            }
            _ => Ok(None),
        }
    }

    fn expr(&mut self, v: &Value, path: &str, stack: &mut Vec<String>) -> Result<Expr, ParseError> {
        if let Some(c) = self.constant(v, path)? {
            return Ok(c);
        }
        match v {
            Value::String(name) => self.reference(name, path, stack),
            Value::Array(items) if !items.is_empty() => {
                let Some(op) = items[0].as_str() else {
                    return err(path, "expected an operator name as the first element");
                };
                self.apply(op, &items[1..], path, stack)
            }
            _ => err(path, format!("cannot read {v} as an expression")),
        }
    }

    fn reference(&mut self, name: &str, path: &str, stack: &mut Vec<String>) -> Result<Expr, ParseError> {
        if let Some(d) = self.vars.get(name) {
            return Ok(d.expr());
        }
        if let Some(e) = self.cache.get(name) {
            return Ok(e.clone());
        }
        let Some(body) = self.named.get(name).cloned() else {
            return err(path, format!("unknown name `{name}`"));
        };
        if stack.iter().any(|s| s == name) {
            return err(path, format!("expression `{name}` refers to itself"));
        }
        stack.push(name.to_string());
        let e = self.expr(&body, &format!("expressions.{name}"), stack)?;
        stack.pop();
        self.cache.insert(name.to_string(), e.clone());
        Ok(e)
    }

    fn args(&mut self, items: &[Value], path: &str, stack: &mut Vec<String>) -> Result<Vec<Expr>, ParseError> {
        items.iter().enumerate().map(|(i, v)| self.expr(v, &at(path, i + 1), stack)).collect()
    }

    fn apply(&mut self, op: &str, items: &[Value], path: &str, stack: &mut Vec<String>) -> Result<Expr, ParseError> {
        let arity = |n: usize| -> Result<(), ParseError> {
            if items.len() != n {
                return err(path, format!("`{op}` takes {n} argument(s), got {}", items.len()));
            }
            Ok(())
        };
        let index_arg = |i: usize| -> Result<usize, ParseError> {
            items[i].as_u64().map(|x| x as usize).ok_or_else(|| ParseError::new(at(path, i + 1), "expected a nonnegative integer"))
        };
        match op {
            "const" => {
                arity(1)?;
                match self.constant(&items[0], &at(path, 1))? {
                    Some(c) => Ok(c),
                    None => err(&at(path, 1), "expected a number, a list of numbers or a list of rows"),
                }
            }
            "+" | "add" => {
                if items.len() < 2 {
                    return err(path, "`+` needs at least two arguments");
                }
                let a = self.args(items, path, stack)?;
                lift(path, Expr::sum_of(&a))
            }
            "-" | "sub" => match items.len() {
                1 => Ok(self.expr(&items[0], &at(path, 1), stack)?.negate()),
                2 => {
                    let a = self.args(items, path, stack)?;
                    lift(path, a[0].try_sub(&a[1]))
                }
                _ => err(path, "`-` takes one or two arguments"),
            },
            "neg" => {
                arity(1)?;
                Ok(self.expr(&items[0], &at(path, 1), stack)?.negate())
            }
            "*" | "mul" => {
                arity(2)?;
                let a = self.args(items, path, stack)?;
                let (l, r) = (&a[0], &a[1]);
                if let Some(c) = l.constant_value() {
                    lift(path, if c.len() == 1 { Ok(r.scale(c[0])) } else { r.multiply(&c) })
                } else if let Some(c) = r.constant_value() {
                    lift(path, if c.len() == 1 { Ok(l.scale(c[0])) } else { l.multiply(&c) })
                } else {
                    lift(path, l.matmul(r))
                }
            }
            "@" | "matmul" => {
                arity(2)?;
                let a = self.args(items, path, stack)?;
                lift(path, a[0].matmul(&a[1]))
            }
            "sum" => {
                arity(1)?;
                Ok(self.expr(&items[0], &at(path, 1), stack)?.sum())
            }
            "transpose" => {
                arity(1)?;
                Ok(self.expr(&items[0], &at(path, 1), stack)?.transpose())
            }
            "reshape" => {
                arity(2)?;
                let e = self.expr(&items[0], &at(path, 1), stack)?;
                let dims: Option<Vec<usize>> =
                    items[1].as_array().and_then(|d| d.iter().map(|x| x.as_u64().map(|n| n as usize)).collect());
                let Some(dims) = dims else {
                    return err(&at(path, 2), "expected a list of dimensions");
                };
                let shape = Shape::from_dims(&dims).map_err(|e| ParseError::new(at(path, 2), e.to_string()))?;
                lift(path, e.reshape(shape))
            }
            "index" => {
                if items.len() != 2 && items.len() != 3 {
                    return err(path, "`index` takes [expr, i] or [expr, i, j]");
                }
                let e = self.expr(&items[0], &at(path, 1), stack)?;
                if items.len() == 2 {
                    let i = index_arg(1)?;
                    lift(path, e.at(i))
                } else {
                    let (i, j) = (index_arg(1)?, index_arg(2)?);
                    lift(path, e.at2(i, j))
                }
            }
            "slice" => {
                arity(3)?;
                let e = self.expr(&items[0], &at(path, 1), stack)?;
                let (s, t) = (index_arg(1)?, index_arg(2)?);
                if t > e.size() {
                    return err(path, format!("slice end {t} exceeds size {}", e.size()));
                }
                lift(path, e.slice(s, t))
            }
            "hstack" | "vstack" => {
                let a = self.args(items, path, stack)?;
                lift(path, if op == "hstack" { Expr::hstack(&a) } else { Expr::vstack(&a) })
            }
            "inner" | "saddle_inner" | "weighted_norm2" | "weighted_log_sum_exp" | "saddle_quad_form" => {
                arity(2)?;
                let a = self.args(items, path, stack)?;
                let f = match op {
                    "inner" => atoms::inner,
                    "saddle_inner" => atoms::saddle_inner,
                    "weighted_norm2" => atoms::weighted_norm2,
                    "weighted_log_sum_exp" => atoms::weighted_log_sum_exp,
                    _ => atoms::saddle_quad_form,
                };
                lift(path, f(&a[0], &a[1]))
            }
            "quasidef_quad_form" => {
                arity(5)?;
                let a = self.args(items, path, stack)?;
                let mut mats = Vec::new();
                for (k, m) in a[2..].iter().enumerate() {
                    let Some(val) = m.constant_value() else {
                        return err(&at(path, k + 3), "P, Q and S must be constant matrices");
                    };
                    let shape = match m.shape() {
                        Shape::Scalar => Shape::Matrix(1, 1),
                        Shape::Vector(n) => Shape::Matrix(n, 1),
                        s => s,
                    };
                    mats.push(Matrix::from_expr_value(shape, val));
                }
                lift(path, atoms::quasidef_quad_form(&a[0], &a[1], &mats[0], &mats[1], &mats[2]))
            }
            "saddle_max" | "saddle_min" => {
                if items.is_empty() || items.len() > 2 {
                    return err(path, format!("`{op}` takes [body] or [body, [constraints]]"));
                }
                let body = self.expr(&items[0], &at(path, 1), stack)?;
                let cons = match items.get(1) {
                    Some(c) => self.constraint_list(c, &at(path, 2))?,
                    None => Vec::new(),
                };
                let r = if op == "saddle_max" {
                    saddlecomp_core::saddle_max(&body, &cons)
                } else {
                    saddlecomp_core::saddle_min(&body, &cons)
                };
                r.map_err(|e| match e {
                    ProblemError::NotDsp(d) => {
                        let parts: Vec<String> = d.iter().map(|x| format!("{}: {}", x.code, x.message)).collect();
                        ParseError { diagnostics: d, ..ParseError::new(path, parts.join("; ")) }
                    }
                    other => ParseError::new(path, other.to_string()),
                })
            }
            _ => match DcpAtom::from_name(op) {
                Some(atom) => {
                    let a = self.args(items, path, stack)?;
                    lift(path, atoms::apply_dcp(atom, &a))
                }
                None => err(&at(path, 0), format!("unknown operator `{op}`")),
            },
        }
    }
}
