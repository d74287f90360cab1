//! Graph-form lowering of DCP expressions into cone rows.
//!
//! [`RowBuilder::lower`] returns one affine function per entry of an
//! expression. With [`Bound::Upper`] the returned functions are upper bounds
//! that can be made tight (epigraph variables of convex atoms); with
//! [`Bound::Lower`] they are tightenable lower bounds (hypographs of concave
//! atoms). [`Bound::Exact`] only accepts affine expressions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::affine::Affine;
use crate::atoms::{DcpAtom, Monotonicity};
use crate::cone::{Cone, ConeProgram, ConeRows, VarRange};
use crate::dsp::{Diagnostic, DiagnosticCode};
use crate::expr::{Constraint, Curvature, Expr, ExprKind, Relation, Sign, VariableDecl};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Exact,
    Upper,
    Lower,
}

impl Bound {
    pub fn flip(self) -> Bound {
        match self {
            Bound::Upper => Bound::Lower,
            Bound::Lower => Bound::Upper,
            Bound::Exact => Bound::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CanonError {
    #[error("not DCP: {}", join_diags(.0))]
    NotDcp(Vec<Diagnostic>),
    #[error("variable `{0}` is not part of this program")]
    UnboundVariable(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("saddle extremum: {0}")]
    Extremum(String),
}

fn join_diags(d: &[Diagnostic]) -> String {
    let parts: Vec<String> = d.iter().map(|x| x.to_string()).collect();
    parts.join("; ")
}

fn not_dcp(path: &[usize], msg: String) -> CanonError {
    CanonError::NotDcp(vec![Diagnostic::new(DiagnosticCode::CurvatureViolation, path, msg)])
}

/// Accumulates cone rows over a growing column space.
#[derive(Clone, Debug, Default)]
pub struct RowBuilder {
    pub ncols: usize,
    pub blocks: Vec<ConeRows>,
    vars: BTreeMap<u64, (VariableDecl, usize)>,
    /// Allocate columns for unseen variables instead of failing.
    pub auto_bind: bool,
    /// Named column ranges, in allocation order.
    pub ranges: Vec<VarRange>,
}

impl RowBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn auto() -> Self {
        RowBuilder { auto_bind: true, ..Self::default() }
    }

    /// Columns for `v`, allocating them if `v` is new.
    pub fn bind(&mut self, v: &VariableDecl) -> usize {
        if let Some(&(_, s)) = self.vars.get(&v.id()) {
            return s;
        }
        let start = self.ncols;
        self.ncols += v.size();
        self.vars.insert(v.id(), (v.clone(), start));
        self.ranges.push(VarRange { name: v.name().to_string(), start, len: v.size() });
        start
    }

    /// Map `v` onto existing columns starting at `start`.
    pub fn alias(&mut self, v: &VariableDecl, start: usize) {
        self.vars.insert(v.id(), (v.clone(), start));
    }

    pub fn column_of(&self, v: &VariableDecl) -> Option<usize> {
        self.vars.get(&v.id()).map(|&(_, s)| s)
    }

    pub fn bound_vars(&self) -> Vec<(VariableDecl, usize)> {
        self.vars.values().cloned().collect()
    }

    pub fn new_aux(&mut self, n: usize) -> Vec<Affine> {
        let start = self.ncols;
        self.ncols += n;
        (start..start + n).map(Affine::column).collect()
    }

    pub fn new_named(&mut self, name: &str, n: usize) -> usize {
        let start = self.ncols;
        self.ncols += n;
        self.ranges.push(VarRange { name: name.to_string(), start, len: n });
        start
    }

    pub fn push(&mut self, rows: ConeRows) {
        if !rows.rows.is_empty() {
            self.blocks.push(rows);
        }
    }

    fn var_columns(&mut self, v: &VariableDecl) -> Result<Vec<Affine>, CanonError> {
        let start = match self.column_of(v) {
            Some(s) => s,
            None if self.auto_bind => self.bind(v),
            None => return Err(CanonError::UnboundVariable(v.name().to_string())),
        };
        Ok((start..start + v.size()).map(Affine::column).collect())
    }

    /// Rows implied by a variable's attributes (nonneg, symmetric, PSD).
    pub fn add_var_attrs(&mut self, v: &VariableDecl) -> Result<(), CanonError> {
        let a = v.attrs();
        let cols = self.var_columns(v)?;
        if a.nonneg {
            self.push(ConeRows::nonneg(cols.clone()));
        }
        if a.psd || a.symmetric {
            let n = v.shape().rows();
            let mut sym = Vec::new();
            for j in 0..n {
                for i in 0..j {
                    sym.push(cols[i + j * n].minus(&cols[j + i * n]));
                }
            }
            self.push(ConeRows::zero(sym));
            if a.psd {
                let packed: Vec<Affine> = crate::expr::svec_entries(n)
                    .into_iter()
                    .map(|(i, j)| if i == j { cols[i + j * n].clone() } else { cols[i + j * n].scaled(core::f64::consts::SQRT_2) })
                    .collect();
                self.push(ConeRows::new(Cone::psd(n), packed));
            }
        }
        Ok(())
    }

    /// Rows for a DCP constraint.
    pub fn add_constraint(&mut self, c: &Constraint) -> Result<(), CanonError> {
        match c.relation {
            Relation::Le => {
                if !c.is_dcp() {
                    return Err(not_dcp(&[], format!("constraint `{c}` is not convex <= concave")));
                }
                let l = self.lower(&c.lhs, Bound::Upper)?;
                let r = self.lower(&c.rhs, Bound::Lower)?;
                let rows = broadcast_zip(&r, &l, |a, b| a.minus(b));
                self.push(ConeRows::nonneg(rows));
            }
            Relation::Eq => {
                if !c.is_dcp() {
                    return Err(not_dcp(&[], format!("equality `{c}` needs affine sides")));
                }
                let l = self.lower(&c.lhs, Bound::Exact)?;
                let r = self.lower(&c.rhs, Bound::Exact)?;
                let rows = broadcast_zip(&l, &r, |a, b| a.minus(b));
                self.push(ConeRows::zero(rows));
            }
        }
        Ok(())
    }

    /// Lower `e` under `bound`; see the module docs.
    pub fn lower(&mut self, e: &Expr, bound: Bound) -> Result<Vec<Affine>, CanonError> {
        self.lower_at(e, bound, &mut Vec::new())
    }

    fn lower_at(&mut self, e: &Expr, bound: Bound, path: &mut Vec<usize>) -> Result<Vec<Affine>, CanonError> {
        if e.is_constant() {
            let vals = e.constant_value().ok_or_else(|| CanonError::Unsupported(format!("cannot evaluate `{e}`")))?;
            return Ok(vals.into_iter().map(Affine::constant).collect());
        }
        let kids = e.children();
        let child = |s: &mut Self, i: usize, b: Bound, path: &mut Vec<usize>| {
            path.push(i);
            let r = s.lower_at(&kids[i], b, path);
            path.pop();
            r
        };
        Ok(match e.kind() {
            ExprKind::Variable(v) => self.var_columns(v)?,
            ExprKind::Constant(_) => unreachable!(),
            ExprKind::Add => {
                let n = e.size();
                let mut out = vec![Affine::zero(); n];
                for i in 0..kids.len() {
                    let a = child(self, i, bound, path)?;
                    for (k, o) in out.iter_mut().enumerate() {
                        o.add_scaled(&a[if a.len() == 1 { 0 } else { k }], 1.0);
                    }
                }
                out
            }
            ExprKind::Neg => child(self, 0, bound.flip(), path)?.iter().map(Affine::neg).collect(),
            ExprKind::Scale(s) => {
                let b = if *s >= 0.0 { bound } else { bound.flip() };
                child(self, 0, b, path)?.iter().map(|a| a.scaled(*s)).collect()
            }
            ExprKind::MulElem(c) => {
                let b = self.linear_bound(&kids[0], c, bound, path)?;
                child(self, 0, b, path)?.iter().zip(c.iter()).map(|(a, s)| a.scaled(*s)).collect()
            }
            ExprKind::LeftMul(m) => {
                let b = self.linear_bound(&kids[0], &m.data, bound, path)?;
                let a = child(self, 0, b, path)?;
                let ncol = kids[0].shape().cols();
                let mut out = Vec::with_capacity(m.rows * ncol);
                for c in 0..ncol {
                    for i in 0..m.rows {
                        let mut acc = Affine::zero();
                        for j in 0..m.cols {
                            acc.add_scaled(&a[j + c * m.cols], m.get(i, j));
                        }
                        out.push(acc);
                    }
                }
                out
            }
            ExprKind::RightMul(m) => {
                let b = self.linear_bound(&kids[0], &m.data, bound, path)?;
                let a = child(self, 0, b, path)?;
                let (r, k) = (kids[0].shape().rows(), kids[0].shape().cols());
                let mut out = Vec::with_capacity(r * m.cols);
                for j in 0..m.cols {
                    for i in 0..r {
                        let mut acc = Affine::zero();
                        for l in 0..k {
                            acc.add_scaled(&a[i + l * r], m.get(l, j));
                        }
                        out.push(acc);
                    }
                }
                out
            }
            ExprKind::Sum => {
                let a = child(self, 0, bound, path)?;
                let mut acc = Affine::zero();
                for t in &a {
                    acc.add_scaled(t, 1.0);
                }
                vec![acc]
            }
            ExprKind::Index(_) | ExprKind::Reshape | ExprKind::Transpose | ExprKind::Concat { .. } => {
                let mut lowered = Vec::with_capacity(kids.len());
                for i in 0..kids.len() {
                    lowered.push(child(self, i, bound, path)?);
                }
                e.gather_map().into_iter().map(|(c, i)| lowered[c][i].clone()).collect()
            }
            ExprKind::Product => {
                return Err(not_dcp(path, format!("`{e}` multiplies two non-constant expressions")));
            }
            ExprKind::Dcp(atom) => self.lower_dcp(*atom, e, bound, path)?,
            ExprKind::Saddle(atom) => {
                return Err(not_dcp(
                    path,
                    format!("saddle atom `{}` can only appear inside a saddle objective or extremum", atom.name()),
                ));
            }
            ExprKind::Extremum(se) => {
                let need = if se.direction.is_max() { Bound::Upper } else { Bound::Lower };
                if bound != need {
                    return Err(not_dcp(
                        path,
                        format!("{} used with the wrong curvature", se.direction.name()),
                    ));
                }
                vec![crate::dualize::lower_extremum(self, se)?]
            }
        })
    }

    /// Bound for the child of a linear map with coefficients `coefs`.
    fn linear_bound(&self, child: &Expr, coefs: &[f64], bound: Bound, path: &[usize]) -> Result<Bound, CanonError> {
        if child.is_affine() {
            return Ok(Bound::Exact);
        }
        match Sign::of_values(coefs) {
            Sign::Zero | Sign::NonNegative => Ok(bound),
            Sign::NonPositive => Ok(bound.flip()),
            Sign::Unknown => Err(not_dcp(path, format!("mixed-sign linear map applied to non-affine `{child}`"))),
        }
    }

    fn lower_dcp(&mut self, atom: DcpAtom, e: &Expr, bound: Bound, path: &mut Vec<usize>) -> Result<Vec<Affine>, CanonError> {
        let need = if atom.curvature() == Curvature::Convex { Bound::Upper } else { Bound::Lower };
        if bound != need {
            return Err(not_dcp(
                path,
                format!("`{e}` is {:?} but is used where a {} bound is needed", atom.curvature(), bound_name(bound)),
            ));
        }
        let kids = e.children();
        let mut args = Vec::with_capacity(kids.len());
        for (i, k) in kids.iter().enumerate() {
            let b = match atom.monotonicity(i, k.sign()) {
                Monotonicity::Increasing => need,
                Monotonicity::Decreasing => need.flip(),
                Monotonicity::None => Bound::Exact,
            };
            if b == Bound::Exact && !k.is_affine() {
                path.push(i);
                let err = not_dcp(path, format!("`{k}` must be affine as an argument of {}", atom.name()));
                path.pop();
                return Err(err);
            }
            path.push(i);
            let lowered = self.lower_at(k, b, path);
            path.pop();
            args.push(lowered?);
        }
        let one = Affine::constant(1.0);
        let a = &args[0];
        let out = match atom {
            DcpAtom::Square => {
                let t = self.new_aux(a.len());
                for (ti, ai) in t.iter().zip(a) {
                    self.push(ConeRows::soc(vec![ti.plus(&one), ai.scaled(2.0), ti.minus(&one)]));
                }
                t
            }
            DcpAtom::Abs => {
                let t = self.new_aux(a.len());
                let mut rows = Vec::new();
                for (ti, ai) in t.iter().zip(a) {
                    rows.push(ti.minus(ai));
                    rows.push(ti.plus(ai));
                }
                self.push(ConeRows::nonneg(rows));
                t
            }
            DcpAtom::Pos => {
                let t = self.new_aux(a.len());
                let mut rows = Vec::new();
                for (ti, ai) in t.iter().zip(a) {
                    rows.push(ti.minus(ai));
                    rows.push(ti.clone());
                }
                self.push(ConeRows::nonneg(rows));
                t
            }
            DcpAtom::Exp => {
                let t = self.new_aux(a.len());
                for (ti, ai) in t.iter().zip(a) {
                    self.push(ConeRows::exp(ai.clone(), one.clone(), ti.clone()));
                }
                t
            }
            DcpAtom::Log => {
                let t = self.new_aux(a.len());
                for (ti, ai) in t.iter().zip(a) {
                    self.push(ConeRows::exp(ti.clone(), one.clone(), ai.clone()));
                }
                t
            }
            DcpAtom::Sqrt => {
                let t = self.new_aux(a.len());
                for (ti, ai) in t.iter().zip(a) {
                    self.push(ConeRows::soc(vec![ai.plus(&one), ti.scaled(2.0), ai.minus(&one)]));
                }
                t
            }
            DcpAtom::Maximum | DcpAtom::Minimum => {
                let n = e.size();
                let t = self.new_aux(n);
                let mut rows = Vec::new();
                for arg in &args {
                    for (i, ti) in t.iter().enumerate() {
                        let ai = &arg[if arg.len() == 1 { 0 } else { i }];
                        rows.push(if atom == DcpAtom::Maximum { ti.minus(ai) } else { ai.minus(ti) });
                    }
                }
                self.push(ConeRows::nonneg(rows));
                t
            }
            DcpAtom::Norm1 => {
                let v = self.new_aux(a.len());
                let t = self.new_aux(1);
                let mut rows = Vec::new();
                let mut total = t[0].clone();
                for (vi, ai) in v.iter().zip(a) {
                    rows.push(vi.minus(ai));
                    rows.push(vi.plus(ai));
                    total.add_scaled(vi, -1.0);
                }
                rows.push(total);
                self.push(ConeRows::nonneg(rows));
                t
            }
            DcpAtom::NormInf => {
                let t = self.new_aux(1);
                let mut rows = Vec::new();
                for ai in a {
                    rows.push(t[0].minus(ai));
                    rows.push(t[0].plus(ai));
                }
                self.push(ConeRows::nonneg(rows));
                t
            }
            DcpAtom::Norm2 => {
                let t = self.new_aux(1);
                let mut rows = vec![t[0].clone()];
                rows.extend(a.iter().cloned());
                self.push(ConeRows::soc(rows));
                t
            }
            DcpAtom::SumSquares => {
                let t = self.new_aux(1);
                let mut rows = vec![t[0].plus(&one)];
                rows.extend(a.iter().map(|ai| ai.scaled(2.0)));
                rows.push(t[0].minus(&one));
                self.push(ConeRows::soc(rows));
                t
            }
            DcpAtom::LogSumExp => {
                let t = self.new_aux(1);
                let z = self.new_aux(a.len());
                let mut budget = one.clone();
                for (zi, ai) in z.iter().zip(a) {
                    self.push(ConeRows::exp(ai.minus(&t[0]), one.clone(), zi.clone()));
                    budget.add_scaled(zi, -1.0);
                }
                self.push(ConeRows::nonneg(vec![budget]));
                t
            }
            DcpAtom::GeoMean => {
                let t = self.new_aux(1);
                if a.len() == 1 {
                    self.push(ConeRows::nonneg(vec![a[0].minus(&t[0])]));
                    return Ok(t);
                }
                let mut level: Vec<Affine> = a.clone();
                let m = a.len().next_power_of_two();
                level.resize(m, t[0].clone());
                while level.len() > 1 {
                    let mut next = Vec::with_capacity(level.len() / 2);
                    for pair in level.chunks(2) {
                        let w = self.new_aux(1).pop().unwrap();
                        self.push(ConeRows::soc(vec![pair[0].plus(&pair[1]), w.scaled(2.0), pair[0].minus(&pair[1])]));
                        next.push(w);
                    }
                    level = next;
                }
                self.push(ConeRows::nonneg(vec![level[0].minus(&t[0])]));
                t
            }
        };
        Ok(out)
    }
}

fn bound_name(b: Bound) -> &'static str {
    match b {
        Bound::Exact => "exact",
        Bound::Upper => "upper",
        Bound::Lower => "lower",
    }
}

/// Entrywise `f(a, b)` with scalar broadcasting.
pub fn broadcast_zip(a: &[Affine], b: &[Affine], f: impl Fn(&Affine, &Affine) -> Affine) -> Vec<Affine> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| f(&a[if a.len() == 1 { 0 } else { i }], &b[if b.len() == 1 { 0 } else { i }]))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A DCP problem lowered to a cone program. For maximization the program
/// minimizes the negated objective.
#[derive(Clone, Debug)]
pub struct LoweredProblem {
    pub program: ConeProgram,
    pub vars: Vec<(VariableDecl, usize)>,
    pub sense: Sense,
}

impl LoweredProblem {
    /// Objective value of the original problem from a program value.
    pub fn value_from(&self, program_value: f64) -> f64 {
        match self.sense {
            Sense::Minimize => program_value,
            Sense::Maximize => -program_value,
        }
    }

    pub fn extract(&self, primal: &[f64]) -> Vec<(VariableDecl, Vec<f64>)> {
        self.vars.iter().map(|(v, s)| (v.clone(), primal[*s..*s + v.size()].to_vec())).collect()
    }
}

/// Compliance diagnostics for a DCP problem.
pub fn dcp_diagnostics(objective: &Expr, sense: Sense, constraints: &[Constraint]) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    if !objective.shape().is_scalar() {
        d.push(Diagnostic::new(DiagnosticCode::CurvatureViolation, &[], "objective must be scalar"));
    }
    let ok = match sense {
        Sense::Minimize => objective.is_convex(),
        Sense::Maximize => objective.is_concave(),
    };
    if !ok {
        d.push(Diagnostic::new(
            DiagnosticCode::CurvatureViolation,
            &[],
            format!("objective `{objective}` has curvature {:?}", objective.curvature()),
        ));
    }
    for (i, c) in constraints.iter().enumerate() {
        if !c.is_dcp() {
            d.push(Diagnostic::new(DiagnosticCode::CurvatureViolation, &[i], format!("constraint `{c}` is not DCP")));
        }
    }
    d
}

/// Lower a DCP problem (saddle extremum nodes allowed) to a cone program.
pub fn canonicalize_dcp(objective: &Expr, sense: Sense, constraints: &[Constraint]) -> Result<LoweredProblem, CanonError> {
    let diags = dcp_diagnostics(objective, sense, constraints);
    if !diags.is_empty() {
        return Err(CanonError::NotDcp(diags));
    }
    let mut rb = RowBuilder::auto();
    let mut vars = objective.variables();
    for c in constraints {
        vars.extend(c.variables());
    }
    vars.sort();
    vars.dedup();
    for v in &vars {
        rb.bind(v);
    }
    for v in &vars {
        rb.add_var_attrs(v)?;
    }
    for c in constraints {
        rb.add_constraint(c)?;
    }
    let obj = match sense {
        Sense::Minimize => rb.lower(objective, Bound::Upper)?.remove(0),
        Sense::Maximize => rb.lower(objective, Bound::Lower)?.remove(0).neg(),
    };
    let program = ConeProgram::from_rows(&obj, &rb.blocks, rb.ncols, rb.ranges.clone());
    let vars = vars.into_iter().map(|v| {
        let s = rb.column_of(&v).unwrap();
        (v, s)
    });
    Ok(LoweredProblem { program, vars: vars.collect(), sense })
}

#[cfg(test)]
mod tests;
