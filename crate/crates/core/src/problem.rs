//! Saddle point problems, saddle extremum functions and saddle problems.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::canon::{canonicalize_dcp, CanonError, RowBuilder, Sense};
use crate::cone::{solve_cone, ConeProgram, ConeSolver, SolveStatus, SolverError, SolverOptions};
use crate::dsp::{self, Diagnostic, DiagnosticCode, RolePartition};
use crate::dualize::{build_form, dualize_into, split_attached};
use crate::expr::{Constraint, Expr, ExprKind, Shape, Valuation, VariableDecl};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    pub fn is_max(self) -> bool {
        self == Direction::Max
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Max => "saddle_max",
            Direction::Min => "saddle_min",
        }
    }
}

/// A saddle extremum: `sup` (max) or `inf` (min) of `body` over the local
/// variables restricted by `constraints`.
#[derive(Clone, Debug)]
pub struct Extremum {
    pub direction: Direction,
    pub body: Expr,
    pub locals: Vec<VariableDecl>,
    pub constraints: Vec<Constraint>,
}

impl Extremum {
    /// Free (regular) variables of the extremum.
    pub fn outer_variables(&self) -> Vec<VariableDecl> {
        let locals: BTreeSet<u64> = self.locals.iter().map(VariableDecl::id).collect();
        self.body.variables().into_iter().filter(|v| !locals.contains(&v.id())).collect()
    }

    fn is_local(&self, v: &VariableDecl) -> bool {
        self.locals.iter().any(|l| l == v)
    }

    /// Value at fixed outer variables together with a particular optimal
    /// value of the locals.
    pub fn evaluate(
        &self,
        vals: &dyn Valuation,
        solver: &dyn ConeSolver,
        opts: &SolverOptions,
    ) -> Result<(f64, Vec<(VariableDecl, Vec<f64>)>), ProblemError> {
        let mut fixed = BTreeMap::new();
        for v in self.outer_variables() {
            let val = vals.value_of(&v).ok_or_else(|| ProblemError::MissingValue(v.name().to_string()))?;
            fixed.insert(v.id(), val.to_vec());
        }
        let body = self.body.substitute(&fixed);
        // locals are the minimization variables of ∓body
        let scale = if self.direction.is_max() { -1.0 } else { 1.0 };
        let none = |_: &VariableDecl| false;
        let mut cons = self.constraints.clone();
        let (_, attached) = split_attached(&body, &none);
        cons.extend(attached);
        let lp = minimize_dualized(&body, &none, &self.locals, &cons, &[], &[], scale)?;
        let sol = solve_cone(solver, &lp.program, opts)?;
        if sol.status != SolveStatus::Optimal {
            return Err(ProblemError::Solver(sol.status));
        }
        let v = lp.program.objective_value(&sol.primal);
        let value = if self.direction.is_max() { -v } else { v };
        Ok((value, lp.extract(&sol.primal)))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("not DSP-compliant: {}", render(.0))]
    NotDsp(Vec<Diagnostic>),
    #[error(transparent)]
    Canon(#[from] CanonError),
    #[error(transparent)]
    Backend(#[from] SolverError),
    #[error("solver returned {}", .0.as_str())]
    Solver(SolveStatus),
    #[error("variable `{0}` has no value")]
    MissingValue(String),
}

fn render(d: &[Diagnostic]) -> String {
    let parts: Vec<String> = d.iter().map(|x| x.to_string()).collect();
    parts.join("; ")
}

fn extremum(direction: Direction, body: &Expr, constraints: &[Constraint]) -> Result<Expr, ProblemError> {
    if !body.shape().is_scalar() {
        return Err(ProblemError::NotDsp(vec![Diagnostic::new(
            DiagnosticCode::CurvatureViolation,
            &[],
            "saddle extremum body must be scalar",
        )]));
    }
    let (parts, mut diags) = dsp::body_roles(body);
    let mut locals: BTreeMap<u64, VariableDecl> = BTreeMap::new();
    for v in body.variables() {
        if v.is_local() {
            locals.insert(v.id(), v);
        }
    }
    // nested extrema keep their own locals; ours must not be reused there
    for se in body.extremum_nodes() {
        for v in &se.locals {
            if locals.contains_key(&v.id()) {
                diags.push(Diagnostic::new(
                    DiagnosticCode::NonLocalVariable,
                    &[],
                    format!("local variable `{}` is used by more than one saddle extremum", v.name()),
                ));
            }
        }
    }
    let (inner_side, inner_name, outer_name) = match direction {
        Direction::Max => (&parts.concave_vars, "concave", "convex"),
        Direction::Min => (&parts.convex_vars, "convex", "concave"),
    };
    let outer_side = match direction {
        Direction::Max => &parts.convex_vars,
        Direction::Min => &parts.concave_vars,
    };
    for v in inner_side {
        if !v.is_local() {
            diags.push(Diagnostic::new(
                DiagnosticCode::NonLocalVariable,
                &[],
                format!("`{}` is not a local variable but appears as a {inner_name} variable", v.name()),
            ));
        }
    }
    for v in outer_side {
        if v.is_local() {
            diags.push(Diagnostic::new(
                DiagnosticCode::NonLocalVariable,
                &[],
                format!("local variable `{}` appears as a {outer_name} variable", v.name()),
            ));
        }
    }
    for (i, c) in constraints.iter().enumerate() {
        for v in c.variables() {
            if v.is_local() {
                locals.insert(v.id(), v);
            } else {
                diags.push(Diagnostic::new(
                    DiagnosticCode::NonLocalVariable,
                    &[i],
                    format!("`{}` is not a local variable but appears in constraint `{c}`", v.name()),
                ));
            }
        }
        if !c.is_dcp() {
            diags.push(Diagnostic::new(
                DiagnosticCode::CurvatureViolation,
                &[i],
                format!("constraint `{c}` is not DCP"),
            ));
        }
    }
    if !diags.is_empty() {
        return Err(ProblemError::NotDsp(diags));
    }
    let se = Extremum {
        direction,
        body: body.clone(),
        locals: locals.into_values().collect(),
        constraints: constraints.to_vec(),
    };
    Ok(Expr::build(ExprKind::Extremum(Arc::new(se)), Vec::new(), Shape::Scalar))
}

/// `sup` of `body` over its local variables subject to `constraints`. The
/// result is convex in the remaining variables.
pub fn saddle_max(body: &Expr, constraints: &[Constraint]) -> Result<Expr, ProblemError> {
    extremum(Direction::Max, body, constraints)
}

/// `inf` of `body` over its local variables subject to `constraints`. The
/// result is concave in the remaining variables.
pub fn saddle_min(body: &Expr, constraints: &[Constraint]) -> Result<Expr, ProblemError> {
    extremum(Direction::Min, body, constraints)
}

/// Variable values written by successful solves.
#[derive(Clone, Debug, Default)]
pub struct ValueStore {
    values: BTreeMap<u64, (VariableDecl, Vec<f64>)>,
}

impl ValueStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &VariableDecl) -> Option<&[f64]> {
        self.values.get(&v.id()).map(|(_, x)| x.as_slice())
    }

    pub fn set(&mut self, v: &VariableDecl, value: Vec<f64>) {
        self.values.insert(v.id(), (v.clone(), value));
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableDecl, &[f64])> {
        self.values.values().map(|(v, x)| (v, x.as_slice()))
    }

    /// Commit all assignments at once.
    pub fn commit(&mut self, assignments: &[(VariableDecl, Vec<f64>)]) {
        for (v, x) in assignments {
            self.set(v, x.clone());
        }
    }
}

impl Valuation for ValueStore {
    fn value_of(&self, v: &VariableDecl) -> Option<&[f64]> {
        self.get(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportStatus {
    Solved,
    GapTooLarge,
    SolverFailure,
    NotDSP,
}

impl ReportStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportStatus::Solved => "Solved",
            ReportStatus::GapTooLarge => "GapTooLarge",
            ReportStatus::SolverFailure => "SolverFailure",
            ReportStatus::NotDSP => "NotDSP",
        }
    }
}

/// Result of a solve. `value` is NaN when no value is available.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: ReportStatus,
    pub value: f64,
    pub gap: f64,
    pub tolerance: f64,
    /// Minimized dualized `sup_y f` (saddle point problems).
    pub v_plus: Option<f64>,
    /// Minimized dualized `sup_x -f` (saddle point problems).
    pub v_minus: Option<f64>,
    pub x_star: Vec<(VariableDecl, Vec<f64>)>,
    pub y_star: Vec<(VariableDecl, Vec<f64>)>,
    pub solver_status: Option<SolveStatus>,
    pub diagnostics: Vec<Diagnostic>,
    pub message: String,
}

impl SolveReport {
    fn failed(status: ReportStatus, tolerance: f64, message: String) -> Self {
        SolveReport {
            status,
            value: f64::NAN,
            gap: f64::NAN,
            tolerance,
            v_plus: None,
            v_minus: None,
            x_star: Vec::new(),
            y_star: Vec::new(),
            solver_status: None,
            diagnostics: Vec::new(),
            message,
        }
    }

    pub fn value_of(&self, v: &VariableDecl) -> Option<&[f64]> {
        self.x_star.iter().chain(&self.y_star).find(|(w, _)| w == v).map(|(_, x)| x.as_slice())
    }
}

/// Options for the two-sided solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleOptions {
    /// Relative gap tolerance.
    pub tol: f64,
    /// Absolute floor on the accepted gap.
    pub abs_floor: f64,
    pub solver: SolverOptions,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        SaddleOptions { tol: 1e-6, abs_floor: 1e-8, solver: SolverOptions::default() }
    }
}

/// `MinimizeMaximize(f)`: minimize over the convex variables, maximize over
/// the concave ones.
#[derive(Clone, Debug)]
pub struct MinimizeMaximize {
    pub expr: Expr,
}

impl MinimizeMaximize {
    pub fn new(expr: Expr) -> Self {
        MinimizeMaximize { expr }
    }

    pub fn is_dsp(&self) -> bool {
        dsp::is_dsp(&self.expr).0
    }
}

/// A cone program minimizing a dualized saddle max, with the positions of
/// the minimization variables.
#[derive(Clone, Debug)]
pub struct DualizedProgram {
    pub program: ConeProgram,
    pub vars: Vec<(VariableDecl, usize)>,
}

impl DualizedProgram {
    pub fn extract(&self, primal: &[f64]) -> Vec<(VariableDecl, Vec<f64>)> {
        self.vars.iter().map(|(v, s)| (v.clone(), primal[*s..*s + v.size()].to_vec())).collect()
    }
}

/// Program for `min_{x ∈ X} sup_{y ∈ Y} scale·f(x, y)` with the sup
/// dualized. `concave` marks the `y` variables.
pub fn minimize_dualized(
    f: &Expr,
    concave: &dyn Fn(&VariableDecl) -> bool,
    inf_vars: &[VariableDecl],
    inf_constraints: &[Constraint],
    sup_vars: &[VariableDecl],
    sup_constraints: &[Constraint],
    scale: f64,
) -> Result<DualizedProgram, CanonError> {
    let mut form = build_form(f, concave, scale)?;
    form.bind_concave(sup_vars)?;
    form.add_set(sup_constraints)?;
    let mut rb = RowBuilder::auto();
    for v in inf_vars {
        rb.bind(v);
    }
    for c in inf_constraints {
        for v in c.variables() {
            rb.bind(&v);
        }
    }
    for (v, _) in rb.bound_vars() {
        rb.add_var_attrs(&v)?;
    }
    for c in inf_constraints {
        rb.add_constraint(c)?;
    }
    let known: BTreeSet<u64> = rb.bound_vars().iter().map(|(v, _)| v.id()).collect();
    let handle = dualize_into(&form, &mut rb)?;
    // variables first seen in the objective still need their attribute rows
    for (v, _) in rb.bound_vars() {
        if !known.contains(&v.id()) {
            rb.add_var_attrs(&v)?;
        }
    }
    let program = ConeProgram::from_rows(&handle, &rb.blocks, rb.ncols, rb.ranges.clone());
    let mut vars: Vec<(VariableDecl, usize)> = rb.bound_vars();
    vars.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(DualizedProgram { program, vars })
}

/// `MinimizeMaximize` objective with constraints on either side.
#[derive(Clone, Debug)]
pub struct SaddlePointProblem {
    pub objective: MinimizeMaximize,
    pub constraints: Vec<Constraint>,
    pub declared_cvx: Vec<VariableDecl>,
    pub declared_ccv: Vec<VariableDecl>,
}

/// The two dualized programs of a saddle point problem.
#[derive(Clone, Debug)]
pub struct SaddlePrograms {
    pub roles: RolePartition,
    /// `min_x sup_y f`.
    pub plus: DualizedProgram,
    /// `min_y sup_x -f`.
    pub minus: DualizedProgram,
}

impl SaddlePointProblem {
    pub fn new(objective: MinimizeMaximize, constraints: Vec<Constraint>) -> Self {
        SaddlePointProblem { objective, constraints, declared_cvx: Vec::new(), declared_ccv: Vec::new() }
    }

    pub fn with_roles(mut self, cvx: Vec<VariableDecl>, ccv: Vec<VariableDecl>) -> Self {
        self.declared_cvx = cvx;
        self.declared_ccv = ccv;
        self
    }

    /// All variables of the objective and constraints.
    pub fn variables(&self) -> Vec<VariableDecl> {
        let mut set = BTreeSet::new();
        set.extend(self.objective.expr.variables());
        for c in &self.constraints {
            set.extend(c.variables());
        }
        set.extend(self.declared_cvx.iter().cloned());
        set.extend(self.declared_ccv.iter().cloned());
        set.into_iter().collect()
    }

    /// Fixed-point role inference over the objective and constraints.
    pub fn infer_roles(&self) -> Result<RolePartition, Vec<Diagnostic>> {
        let (parts, mut diags) = dsp::analyze_roles(&self.objective.expr);
        if !self.objective.expr.shape().is_scalar() {
            diags.push(Diagnostic::new(DiagnosticCode::CurvatureViolation, &[], "objective must be scalar"));
        }
        let mut convex: BTreeSet<VariableDecl> = parts.convex_vars.into_iter().collect();
        let mut concave: BTreeSet<VariableDecl> = parts.concave_vars.into_iter().collect();
        convex.extend(self.declared_cvx.iter().cloned());
        concave.extend(self.declared_ccv.iter().cloned());
        for v in convex.intersection(&concave) {
            diags.push(Diagnostic::new(
                DiagnosticCode::MixedVariables,
                &[],
                format!("variable `{}` is both convex and concave", v.name()),
            ));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.is_dcp() {
                diags.push(Diagnostic::new(
                    DiagnosticCode::CurvatureViolation,
                    &[i],
                    format!("constraint `{c}` is not DCP"),
                ));
            }
            if c.has_saddle_atom() {
                diags.push(Diagnostic::new(
                    DiagnosticCode::CurvatureViolation,
                    &[i],
                    format!("constraint `{c}` contains a saddle atom"),
                ));
            }
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        loop {
            let mut changed = false;
            for (i, c) in self.constraints.iter().enumerate() {
                let vars = c.variables();
                let has_cvx = vars.iter().any(|v| convex.contains(v));
                let has_ccv = vars.iter().any(|v| concave.contains(v));
                if has_cvx && has_ccv {
                    return Err(vec![Diagnostic::new(
                        DiagnosticCode::MixedVariables,
                        &[i],
                        format!("constraint `{c}` mixes convex and concave variables"),
                    )]);
                }
                let target = if has_cvx {
                    &mut convex
                } else if has_ccv {
                    &mut concave
                } else {
                    continue;
                };
                for v in vars {
                    changed |= target.insert(v);
                }
            }
            if !changed {
                break;
            }
        }
        let ambiguous: Vec<VariableDecl> =
            self.variables().into_iter().filter(|v| !convex.contains(v) && !concave.contains(v)).collect();
        if !ambiguous.is_empty() {
            let names: Vec<&str> = ambiguous.iter().map(VariableDecl::name).collect();
            return Err(vec![Diagnostic::new(
                DiagnosticCode::AmbiguousRole,
                &[],
                format!("cannot tell whether {} are convex or concave; list them explicitly", names.join(", ")),
            )]);
        }
        Ok(RolePartition {
            convex_vars: convex.into_iter().collect(),
            concave_vars: concave.into_iter().collect(),
            affine_vars: Vec::new(),
        })
    }

    pub fn is_dsp(&self) -> (bool, Vec<Diagnostic>) {
        match self.infer_roles() {
            Ok(_) => (true, Vec::new()),
            Err(d) => (false, d),
        }
    }

    pub fn convex_variables(&self) -> Vec<VariableDecl> {
        self.infer_roles().map(|r| r.convex_vars).unwrap_or_default()
    }

    pub fn concave_variables(&self) -> Vec<VariableDecl> {
        self.infer_roles().map(|r| r.concave_vars).unwrap_or_default()
    }

    /// Build both dualized programs.
    pub fn programs(&self) -> Result<SaddlePrograms, ProblemError> {
        let roles = self.infer_roles().map_err(ProblemError::NotDsp)?;
        let f = &self.objective.expr;
        let is_ccv = |v: &VariableDecl| roles.is_concave(v);
        let is_cvx = |v: &VariableDecl| roles.is_convex(v);
        let (att_y, att_x) = split_attached(f, &is_ccv);
        let mut xcons: Vec<Constraint> = Vec::new();
        let mut ycons: Vec<Constraint> = Vec::new();
        for c in &self.constraints {
            let vars = c.variables();
            if !vars.is_empty() && vars.iter().all(|v| roles.is_concave(v)) {
                ycons.push(c.clone());
            } else {
                xcons.push(c.clone());
            }
        }
        xcons.extend(att_x);
        ycons.extend(att_y);
        let plus = minimize_dualized(f, &is_ccv, &roles.convex_vars, &xcons, &roles.concave_vars, &ycons, 1.0)?;
        let minus = minimize_dualized(f, &is_cvx, &roles.concave_vars, &ycons, &roles.convex_vars, &xcons, -1.0)?;
        Ok(SaddlePrograms { roles, plus, minus })
    }

    /// Solve both dualized programs and certify the gap. Variable values are
    /// written to `store` only when the gap certificate holds.
    pub fn solve(&self, solver: &dyn ConeSolver, opts: &SaddleOptions, store: &mut ValueStore) -> SolveReport {
        let progs = match self.programs() {
            Ok(p) => p,
            Err(ProblemError::NotDsp(d)) => {
                let mut r = SolveReport::failed(ReportStatus::NotDSP, opts.tol, "problem is not DSP-compliant".into());
                r.diagnostics = d;
                return r;
            }
            Err(e) => return SolveReport::failed(ReportStatus::NotDSP, opts.tol, e.to_string()),
        };
        let mut values = [0.0f64; 2];
        let mut primals: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (k, dp) in [&progs.plus, &progs.minus].into_iter().enumerate() {
            match solve_cone(solver, &dp.program, &opts.solver) {
                Ok(sol) if sol.status == SolveStatus::Optimal => {
                    values[k] = dp.program.objective_value(&sol.primal);
                    primals[k] = sol.primal;
                }
                Ok(sol) => {
                    let side = if k == 0 { "min-max" } else { "max-min" };
                    let mut r = SolveReport::failed(
                        ReportStatus::SolverFailure,
                        opts.tol,
                        format!("{side} program: solver returned {}", sol.status.as_str()),
                    );
                    r.solver_status = Some(sol.status);
                    return r;
                }
                Err(e) => return SolveReport::failed(ReportStatus::SolverFailure, opts.tol, e.to_string()),
            }
        }
        let (vp, vm) = (values[0], values[1]);
        let scale = vp.abs().max(1.0);
        let gap = (vp + vm).abs() / scale;
        let ok = (vp + vm).abs() <= (opts.tol * scale).max(opts.abs_floor);
        let pick = |dp: &DualizedProgram, primal: &[f64], keep: &dyn Fn(&VariableDecl) -> bool| {
            dp.extract(primal).into_iter().filter(|(v, _)| keep(v)).collect::<Vec<_>>()
        };
        let x_star = pick(&progs.plus, &primals[0], &|v| progs.roles.is_convex(v));
        let y_star = pick(&progs.minus, &primals[1], &|v| progs.roles.is_concave(v));
        let status = if ok { ReportStatus::Solved } else { ReportStatus::GapTooLarge };
        if ok {
            store.commit(&x_star);
            store.commit(&y_star);
        }
        SolveReport {
            status,
            value: vp,
            gap,
            tolerance: opts.tol,
            v_plus: Some(vp),
            v_minus: Some(vm),
            x_star,
            y_star,
            solver_status: Some(SolveStatus::Optimal),
            diagnostics: Vec::new(),
            message: if ok {
                String::new()
            } else {
                format!("duality gap {gap:.3e} exceeds tolerance {:.3e} (v+ = {vp}, v- = {vm})", opts.tol)
            },
        }
    }
}

#[derive(Clone, Debug)]
pub enum Objective {
    Minimize(Expr),
    Maximize(Expr),
}

impl Objective {
    pub fn expr(&self) -> &Expr {
        match self {
            Objective::Minimize(e) | Objective::Maximize(e) => e,
        }
    }

    pub fn sense(&self) -> Sense {
        match self {
            Objective::Minimize(_) => Sense::Minimize,
            Objective::Maximize(_) => Sense::Maximize,
        }
    }
}

/// A DCP problem whose objective and constraints may contain saddle
/// extremum functions. The lowered problem is a restriction: for
/// minimization the returned value is an upper bound, exact when the
/// exchange of sup and inf is valid for every extremum.
#[derive(Clone, Debug)]
pub struct SaddleProblem {
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
}

impl SaddleProblem {
    pub fn new(objective: Objective, constraints: Vec<Constraint>) -> Self {
        SaddleProblem { objective, constraints }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut d = crate::canon::dcp_diagnostics(self.objective.expr(), self.objective.sense(), &self.constraints);
        let mut all = vec![self.objective.expr().clone()];
        for c in &self.constraints {
            all.push(c.lhs.clone());
            all.push(c.rhs.clone());
        }
        let mut seen = BTreeMap::new();
        for e in &all {
            d.extend(dsp::local_scope_diagnostics(e));
            for se in e.extremum_nodes() {
                for v in &se.locals {
                    if let Some(prev) = seen.insert(v.id(), Arc::as_ptr(&se)) {
                        if prev != Arc::as_ptr(&se) {
                            d.push(Diagnostic::new(
                                DiagnosticCode::NonLocalVariable,
                                &[],
                                format!("local variable `{}` is used by more than one saddle extremum", v.name()),
                            ));
                        }
                    }
                }
            }
        }
        d
    }

    pub fn lower(&self) -> Result<crate::canon::LoweredProblem, ProblemError> {
        let d = self.diagnostics();
        if !d.is_empty() {
            return Err(ProblemError::NotDsp(d));
        }
        Ok(canonicalize_dcp(self.objective.expr(), self.objective.sense(), &self.constraints)?)
    }

    /// Single cone solve of the lowered problem, then recovery of a
    /// particular optimal value for every local variable.
    pub fn solve(&self, solver: &dyn ConeSolver, opts: &SolverOptions, store: &mut ValueStore) -> SolveReport {
        let lowered = match self.lower() {
            Ok(l) => l,
            Err(ProblemError::NotDsp(d)) => {
                let mut r = SolveReport::failed(ReportStatus::NotDSP, 0.0, "problem is not DCP".into());
                r.diagnostics = d;
                return r;
            }
            Err(e) => return SolveReport::failed(ReportStatus::NotDSP, 0.0, e.to_string()),
        };
        let sol = match solve_cone(solver, &lowered.program, opts) {
            Ok(s) => s,
            Err(e) => return SolveReport::failed(ReportStatus::SolverFailure, 0.0, e.to_string()),
        };
        if sol.status != SolveStatus::Optimal {
            let mut r = SolveReport::failed(
                ReportStatus::SolverFailure,
                0.0,
                format!("solver returned {}", sol.status.as_str()),
            );
            r.solver_status = Some(sol.status);
            return r;
        }
        let value = lowered.value_from(lowered.program.objective_value(&sol.primal));
        let x_star = lowered.extract(&sol.primal);
        let mut xs_store = ValueStore::new();
        xs_store.commit(&x_star);
        let mut y_star = Vec::new();
        let mut message = String::new();
        let mut exprs = vec![self.objective.expr().clone()];
        for c in &self.constraints {
            exprs.push(c.lhs.clone());
            exprs.push(c.rhs.clone());
        }
        for e in &exprs {
            for se in e.extremum_nodes() {
                match se.evaluate(&xs_store, solver, opts) {
                    Ok((_, locals)) => y_star.extend(locals.into_iter().filter(|(v, _)| se.is_local(v))),
                    Err(err) => message = format!("local recovery failed: {err}"),
                }
            }
        }
        store.commit(&x_star);
        store.commit(&y_star);
        SolveReport {
            status: ReportStatus::Solved,
            value,
            gap: 0.0,
            tolerance: 0.0,
            v_plus: None,
            v_minus: None,
            x_star,
            y_star,
            solver_status: Some(SolveStatus::Optimal),
            diagnostics: Vec::new(),
            message,
        }
    }
}

/// The variables of `e` on the side selected by `side`.
pub fn filter_vars(e: &Expr, side: &dyn Fn(&VariableDecl) -> bool) -> Vec<VariableDecl> {
    e.variables().into_iter().filter(|v| side(v)).collect()
}
