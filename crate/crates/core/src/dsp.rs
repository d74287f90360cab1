//! Saddle-calculus compliance checks and variable role classification.
//!
//! An expression is compliant when it is built from saddle atoms and DCP
//! terms by nonnegative combinations and negation (which swaps roles), the
//! saddle atom arguments respect the atom's slot rules, and no variable ends
//! up on both the convex and the concave side.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Curvature, Expr, ExprKind, VariableDecl};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticCode {
    MixedVariables,
    CurvatureViolation,
    MonotonicityViolation,
    NonLocalVariable,
    AmbiguousRole,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::MixedVariables => "MixedVariables",
            DiagnosticCode::CurvatureViolation => "CurvatureViolation",
            DiagnosticCode::MonotonicityViolation => "MonotonicityViolation",
            DiagnosticCode::NonLocalVariable => "NonLocalVariable",
            DiagnosticCode::AmbiguousRole => "AmbiguousRole",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A compliance failure located by its child-index path from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub path: Vec<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, path: &[usize], message: impl Into<String>) -> Self {
        Diagnostic { code, path: path.to_vec(), message: message.into() }
    }

    pub fn path_string(&self) -> String {
        let mut s = String::from("root");
        for p in &self.path {
            s.push_str(&format!(".{p}"));
        }
        s
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path_string(), self.message)
    }
}

/// Variables split by role. Lists are id-sorted and disjoint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RolePartition {
    pub convex_vars: Vec<VariableDecl>,
    pub concave_vars: Vec<VariableDecl>,
    pub affine_vars: Vec<VariableDecl>,
}

impl RolePartition {
    pub fn is_convex(&self, v: &VariableDecl) -> bool {
        self.convex_vars.binary_search(v).is_ok()
    }

    pub fn is_concave(&self, v: &VariableDecl) -> bool {
        self.concave_vars.binary_search(v).is_ok()
    }

    pub fn all(&self) -> Vec<VariableDecl> {
        let mut v: Vec<VariableDecl> =
            self.convex_vars.iter().chain(&self.concave_vars).chain(&self.affine_vars).cloned().collect();
        v.sort();
        v
    }

    pub fn names(list: &[VariableDecl]) -> Vec<&str> {
        list.iter().map(VariableDecl::name).collect()
    }

    /// Roles with convex and concave swapped.
    pub fn swapped(&self) -> RolePartition {
        RolePartition {
            convex_vars: self.concave_vars.clone(),
            concave_vars: self.convex_vars.clone(),
            affine_vars: self.affine_vars.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Convex,
    Concave,
    Affine,
}

impl Role {
    fn flip(self) -> Role {
        match self {
            Role::Convex => Role::Concave,
            Role::Concave => Role::Convex,
            Role::Affine => Role::Affine,
        }
    }
}

#[derive(Default)]
struct Collector {
    convex: BTreeMap<u64, VariableDecl>,
    concave: BTreeMap<u64, VariableDecl>,
    affine: BTreeMap<u64, VariableDecl>,
    diags: Vec<Diagnostic>,
}

impl Collector {
    fn add(&mut self, v: VariableDecl, role: Role) {
        let map = match role {
            Role::Convex => &mut self.convex,
            Role::Concave => &mut self.concave,
            Role::Affine => &mut self.affine,
        };
        map.insert(v.id(), v);
    }

    fn add_all(&mut self, e: &Expr, role: Role) {
        for v in e.variables() {
            self.add(v, role);
        }
    }

    fn visit(&mut self, e: &Expr, flipped: bool, path: &mut Vec<usize>) {
        let orient = |r: Role| if flipped { r.flip() } else { r };
        match e.kind() {
            ExprKind::Add if e.shape().is_scalar() => self.visit_children(e, flipped, path),
            ExprKind::Neg if e.shape().is_scalar() => self.visit_child(e, 0, !flipped, path),
            ExprKind::Scale(s) if e.shape().is_scalar() => {
                if *s == 0.0 {
                    self.add_all(e, Role::Affine);
                } else {
                    self.visit_child(e, 0, if *s < 0.0 { !flipped } else { flipped }, path);
                }
            }
            ExprKind::Sum | ExprKind::Reshape | ExprKind::Index(_) if e.children()[0].shape().is_scalar() => {
                self.visit_child(e, 0, flipped, path)
            }
            ExprKind::Saddle(atom) => {
                let (f, g) = (&e.children()[0], &e.children()[1]);
                for (slot, arg) in [(0usize, f), (1, g)] {
                    if arg.has_saddle_atom() {
                        path.push(slot);
                        self.diags.push(Diagnostic::new(
                            DiagnosticCode::CurvatureViolation,
                            path,
                            format!("{}: saddle expression used as an atom argument", atom.name()),
                        ));
                        path.pop();
                    }
                }
                for (slot, code, msg) in atom.arg_violations(f, g) {
                    path.push(slot);
                    self.diags.push(Diagnostic::new(code, path, msg));
                    path.pop();
                }
                self.add_all(f, orient(Role::Convex));
                self.add_all(g, orient(Role::Concave));
            }
            _ => {
                if e.has_saddle_atom() {
                    self.diags.push(Diagnostic::new(
                        DiagnosticCode::CurvatureViolation,
                        path,
                        format!("saddle expression inside `{e}`, which is not a nonnegative combination"),
                    ));
                    self.add_all(e, Role::Affine);
                    return;
                }
                match e.curvature() {
                    Curvature::Constant => {}
                    Curvature::Affine => self.add_all(e, Role::Affine),
                    Curvature::Convex => self.add_all(e, orient(Role::Convex)),
                    Curvature::Concave => self.add_all(e, orient(Role::Concave)),
                    Curvature::Unknown => {
                        let msg = if matches!(e.kind(), ExprKind::Product) {
                            format!("`{e}` is a product of variables, not built from a saddle atom")
                        } else {
                            format!("`{e}` has unknown curvature")
                        };
                        self.diags.push(Diagnostic::new(DiagnosticCode::CurvatureViolation, path, msg));
                        self.add_all(e, Role::Affine);
                    }
                }
            }
        }
    }

    fn visit_child(&mut self, e: &Expr, i: usize, flipped: bool, path: &mut Vec<usize>) {
        path.push(i);
        self.visit(&e.children()[i], flipped, path);
        path.pop();
    }

    fn visit_children(&mut self, e: &Expr, flipped: bool, path: &mut Vec<usize>) {
        for i in 0..e.children().len() {
            self.visit_child(e, i, flipped, path);
        }
    }

    fn finish(mut self) -> (RolePartition, Vec<Diagnostic>) {
        let mixed: Vec<u64> = self.convex.keys().filter(|k| self.concave.contains_key(k)).copied().collect();
        for id in &mixed {
            let v = self.convex.remove(id).unwrap();
            self.concave.remove(id);
            self.diags.push(Diagnostic::new(
                DiagnosticCode::MixedVariables,
                &[],
                format!("variable `{}` appears on both the convex and the concave side", v.name()),
            ));
            self.affine.insert(*id, v);
        }
        self.affine.retain(|k, _| !self.convex.contains_key(k) && !self.concave.contains_key(k));
        let parts = RolePartition {
            convex_vars: self.convex.into_values().collect(),
            concave_vars: self.concave.into_values().collect(),
            affine_vars: self.affine.into_values().collect(),
        };
        (parts, self.diags)
    }
}

fn analyze(e: &Expr) -> (RolePartition, Vec<Diagnostic>) {
    let (parts, mut diags) = body_roles(e);
    diags.extend(local_scope_diagnostics(e));
    (parts, diags)
}

/// Roles and calculus diagnostics without the local-variable scope checks
/// (used for saddle extremum bodies, where locals occur free).
pub fn body_roles(e: &Expr) -> (RolePartition, Vec<Diagnostic>) {
    let mut c = Collector::default();
    c.visit(e, false, &mut Vec::new());
    c.finish()
}

/// Local variables must be bound by exactly one saddle extremum and must not
/// occur free.
pub fn local_scope_diagnostics(e: &Expr) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut owner: BTreeSet<u64> = BTreeSet::new();
    let mut paths: Vec<(Vec<usize>, alloc::sync::Arc<crate::problem::Extremum>)> = Vec::new();
    e.walk(&mut |node, path| {
        if let ExprKind::Extremum(se) = node.kind() {
            paths.push((path.to_vec(), se.clone()));
        }
    });
    for (path, se) in &paths {
        for v in &se.locals {
            if !owner.insert(v.id()) {
                diags.push(Diagnostic::new(
                    DiagnosticCode::NonLocalVariable,
                    path,
                    format!("local variable `{}` is used by more than one saddle extremum", v.name()),
                ));
            }
        }
    }
    for v in e.variables() {
        if v.is_local() {
            diags.push(Diagnostic::new(
                DiagnosticCode::NonLocalVariable,
                &[],
                format!("local variable `{}` occurs outside a saddle extremum", v.name()),
            ));
        }
    }
    diags
}

/// Compliance verdict with all diagnostics.
pub fn is_dsp(e: &Expr) -> (bool, Vec<Diagnostic>) {
    let (_, diags) = analyze(e);
    (diags.is_empty(), diags)
}

/// Role partition of `variables_of(e)`. Variables that cannot be placed on a
/// single side (mixed, or inside non-compliant subtrees) are reported as
/// affine so the lists always partition the variables.
pub fn classify_roles(e: &Expr) -> RolePartition {
    analyze(e).0
}

/// Partition and diagnostics in one pass.
pub fn analyze_roles(e: &Expr) -> (RolePartition, Vec<Diagnostic>) {
    analyze(e)
}

/// Checks that no variable is convex in one partition and concave in another.
pub fn check_no_mixing(parts: &[RolePartition]) -> (bool, Vec<Diagnostic>) {
    let mut convex = BTreeSet::new();
    let mut concave = BTreeSet::new();
    for p in parts {
        convex.extend(p.convex_vars.iter().cloned());
        concave.extend(p.concave_vars.iter().cloned());
    }
    let diags: Vec<Diagnostic> = convex
        .intersection(&concave)
        .map(|v| {
            Diagnostic::new(
                DiagnosticCode::MixedVariables,
                &[],
                format!("variable `{}` is convex in one term and concave in another", v.name()),
            )
        })
        .collect();
    (diags.is_empty(), diags)
}

#[cfg(test)]
mod tests;
