//! Conic saddle forms and their dualization.
//!
//! A [`SaddleConicForm`] describes a saddle function as
//!
//! ```text
//! φ(x, y) = sup_{β : (y, β) ∈ H}  inf_w { f(x, w)ᵀ(y, β) + t(x, w) | S(x, w) ∈ K }
//! ```
//!
//! where `f` and `t` are affine, `S` is a set of cone rows over the convex
//! side columns `(x, w)` and `H` is a set of cone rows over the concave side
//! columns `(y, β)`. The `β` columns are hypograph variables for concave
//! terms; for atoms with affine arguments `H` is empty and the form is the
//! plain `inf{fᵀy + t | ...}` representation.
//!
//! With a concave-side set `Ŷ = {(y, β, v) : G(y, β, v) + g0 ∈ K_Y}` the
//! saddle max is
//!
//! ```text
//! Φ(x) = inf_{w, λ} { t(x, w) + g0ᵀλ | S(x, w) ∈ K, Gᵀλ + f(x, w) = 0, λ ∈ K_Y* }
//! ```
//!
//! once the sup and inf are exchanged and the inner sup is replaced by its
//! conic dual.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::affine::Affine;
use crate::atoms::SaddleAtom;
use crate::canon::{Bound, CanonError, RowBuilder};
use crate::cone::{dual_cone, Cone, ConeKind, ConeProgram, ConeRows, Triplets, VarRange};
use crate::dsp::{Diagnostic, DiagnosticCode};
use crate::expr::{svec_entries, Constraint, Expr, ExprKind, VariableDecl};
use crate::linalg::psd_factor;
use crate::problem::Extremum;

/// Role predicate: `true` for variables on the concave side.
pub type ConcaveSide<'a> = &'a dyn Fn(&VariableDecl) -> bool;

#[derive(Clone, Debug, Default)]
pub struct SaddleConicForm {
    /// Convex side: variable columns and auxiliaries `w`; blocks are `S`.
    pub xs: RowBuilder,
    /// Concave side: variable columns and hypograph auxiliaries `β`;
    /// blocks are `H` (and, after [`SaddleConicForm::add_set`], the set).
    pub ys: RowBuilder,
    /// One affine function of the convex columns per concave column.
    pub f: Vec<Affine>,
    pub t: Affine,
}

impl SaddleConicForm {
    pub fn new() -> Self {
        let mut form = SaddleConicForm::default();
        form.xs.auto_bind = true;
        form.ys.auto_bind = true;
        form
    }

    fn sync_f(&mut self) {
        if self.f.len() < self.ys.ncols {
            self.f.resize(self.ys.ncols, Affine::zero());
        }
    }

    /// Number of real convex-side variable columns.
    pub fn convex_dim(&self) -> usize {
        self.xs.bound_vars().iter().map(|(v, _)| v.size()).sum()
    }

    /// Number of real concave-side variable columns.
    pub fn concave_dim(&self) -> usize {
        self.ys.bound_vars().iter().map(|(v, _)| v.size()).sum()
    }

    /// `φ += c · (b affine over ys)`.
    fn add_concave_affine(&mut self, b: &Affine, c: f64) {
        self.sync_f();
        for &(j, v) in &b.terms {
            self.f[j].constant += c * v;
        }
        self.t.constant += c * b.constant;
    }

    /// `φ += c · Σ g_i b_i` for `g` over xs and `b` over ys.
    fn pair(&mut self, g: &[Affine], b: &[Affine], c: f64) {
        self.sync_f();
        for (gi, bi) in g.iter().zip(b) {
            for &(j, v) in &bi.terms {
                self.f[j].add_scaled(gi, c * v);
            }
            if bi.constant != 0.0 {
                self.t.add_scaled(gi, c * bi.constant);
            }
        }
    }

    /// Add concave-side set constraints (and the attribute rows of the
    /// concave variables). Constraints must only involve concave variables.
    pub fn add_set(&mut self, constraints: &[Constraint]) -> Result<(), CanonError> {
        for c in constraints {
            for v in c.variables() {
                if self.ys.column_of(&v).is_none() {
                    self.ys.bind(&v);
                }
            }
        }
        for (v, _) in self.ys.bound_vars() {
            self.ys.add_var_attrs(&v)?;
        }
        for c in constraints {
            self.ys.add_constraint(c)?;
        }
        self.sync_f();
        Ok(())
    }

    /// Bind variables on the concave side that only occur in the set, with
    /// their attribute rows.
    pub fn bind_concave(&mut self, vars: &[VariableDecl]) -> Result<(), CanonError> {
        for v in vars {
            if self.ys.column_of(v).is_none() {
                self.ys.bind(v);
            }
        }
        self.sync_f();
        Ok(())
    }

    pub fn bind_convex(&mut self, vars: &[VariableDecl]) {
        for v in vars {
            self.xs.bind(v);
        }
    }

    /// Merge `child` (built on its own column spaces) into `self`.
    fn merge(&mut self, child: &SaddleConicForm) {
        let xmap = column_map(&child.xs, &mut self.xs);
        let ymap = column_map(&child.ys, &mut self.ys);
        self.sync_f();
        for (j, fj) in child.f.iter().enumerate() {
            let target = ymap[j];
            let remapped = fj.remap(|c| xmap[c]);
            self.f[target].add_scaled(&remapped, 1.0);
        }
        self.t.add_scaled(&child.t.remap(|c| xmap[c]), 1.0);
        for blk in &child.xs.blocks {
            self.xs.push(remap_block(blk, &xmap));
        }
        for blk in &child.ys.blocks {
            self.ys.push(remap_block(blk, &ymap));
        }
    }

    /// Literal `P f + t p + Q u + R x ⪯_K s` export, with `f` and `t` as
    /// explicit variables tied to the form by equality rows.
    pub fn to_standard(&self) -> StandardForm {
        let nf = self.f.len();
        let var_cols: BTreeMap<usize, ()> = self
            .xs
            .bound_vars()
            .iter()
            .flat_map(|(v, s)| (*s..*s + v.size()).map(|c| (c, ())))
            .collect();
        // column numbering inside the export: x columns, then u columns
        let mut x_index = BTreeMap::new();
        let mut u_index = BTreeMap::new();
        for c in 0..self.xs.ncols {
            if var_cols.contains_key(&c) {
                let k = x_index.len();
                x_index.insert(c, k);
            } else {
                let k = u_index.len();
                u_index.insert(c, k);
            }
        }
        let mut p_mat = Triplets::default();
        let mut q_mat = Triplets::default();
        let mut r_mat = Triplets::default();
        let mut p_vec = Vec::new();
        let mut s_vec = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0;
        let mut emit = |aff: &Affine, f_coef: Option<(usize, f64)>, t_coef: f64, row: usize| {
            // s - (P f + t p + Q u + R x) ∈ K with slack = aff
            if let Some((j, v)) = f_coef {
                p_mat.rows.push(row);
                p_mat.cols.push(j);
                p_mat.vals.push(v);
            }
            p_vec.push(t_coef);
            s_vec.push(aff.constant);
            for &(c, v) in &aff.terms {
                if let Some(&k) = x_index.get(&c) {
                    r_mat.rows.push(row);
                    r_mat.cols.push(k);
                    r_mat.vals.push(-v);
                } else {
                    q_mat.rows.push(row);
                    q_mat.cols.push(u_index[&c]);
                    q_mat.vals.push(-v);
                }
            }
        };
        for (j, fj) in self.f.iter().enumerate() {
            // f_j - fj(x, u) = 0
            emit(&fj.neg(), Some((j, 1.0)), 0.0, row);
            row += 1;
        }
        emit(&self.t.neg(), None, 1.0, row);
        row += 1;
        cones.push(Cone::zero(nf + 1));
        for blk in &self.xs.blocks {
            for r in &blk.rows {
                emit(r, None, 0.0, row);
                row += 1;
            }
            cones.push(blk.cone);
        }
        let nx = x_index.len();
        let nu = u_index.len();
        p_mat.shape = (row, nf);
        q_mat.shape = (row, nu);
        r_mat.shape = (row, nx);
        StandardForm { p: p_mat, q: q_mat, r: r_mat, p_vec, s: s_vec, cones, concave_dim: nf }
    }

    /// `inf_w { f(x̄, w)ᵀŷ + t(x̄, w) | S(x̄, w) ∈ K }` as a cone program,
    /// with `x̄` fixed through equality rows. `yhat` covers every concave
    /// column.
    pub fn inf_program(&self, xbar: &BTreeMap<u64, Vec<f64>>, yhat: &[f64]) -> Result<ConeProgram, CanonError> {
        let mut obj = self.t.clone();
        for (fj, &yj) in self.f.iter().zip(yhat) {
            obj.add_scaled(fj, yj);
        }
        let mut blocks = self.xs.blocks.clone();
        for (v, s) in self.xs.bound_vars() {
            let val = xbar.get(&v.id()).ok_or_else(|| CanonError::UnboundVariable(v.name().to_string()))?;
            let rows = (0..v.size()).map(|i| Affine::column(s + i).minus(&Affine::constant(val[i]))).collect();
            blocks.push(ConeRows::zero(rows));
        }
        Ok(ConeProgram::from_rows(&obj, &blocks, self.xs.ncols, self.xs.ranges.clone()))
    }
}

/// `P f + t p + Q u + R x ⪯_K s`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardForm {
    pub p: Triplets,
    pub q: Triplets,
    pub r: Triplets,
    pub p_vec: Vec<f64>,
    pub s: Vec<f64>,
    pub cones: Vec<Cone>,
    pub concave_dim: usize,
}

/// `{z | ∃u : A z + B u ⪯_K c}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SetRep {
    pub a_mat: Triplets,
    pub b_mat: Triplets,
    pub c: Vec<f64>,
    pub cones: Vec<Cone>,
    pub main_dim: usize,
}

impl SetRep {
    /// Whether `z` belongs to the set for the given auxiliary `u`.
    pub fn contains_with(&self, z: &[f64], u: &[f64], tol: f64) -> bool {
        let az = self.a_mat.mul_vec(z);
        let bu = self.b_mat.mul_vec(u);
        let s: Vec<f64> = (0..self.c.len()).map(|i| self.c[i] - az[i] - bu[i]).collect();
        let mut k = 0;
        self.cones.iter().all(|cone| {
            let ok = cone.contains(&s[k..k + cone.len()], tol);
            k += cone.len();
            ok
        })
    }
}

/// Conic representation of the set cut out by `constraints` over
/// `local_vars`. Any other variable in the constraints is rejected.
pub fn represent_set(local_vars: &[VariableDecl], constraints: &[Constraint]) -> Result<SetRep, CanonError> {
    let mut rb = RowBuilder::new();
    for v in local_vars {
        rb.bind(v);
    }
    let main_dim = rb.ncols;
    for (i, c) in constraints.iter().enumerate() {
        for v in c.variables() {
            if rb.column_of(&v).is_none() {
                return Err(CanonError::NotDcp(vec![Diagnostic::new(
                    DiagnosticCode::NonLocalVariable,
                    &[i],
                    format!("constraint `{c}` references `{}`, which is not a local variable of the set", v.name()),
                )]));
            }
        }
    }
    for v in local_vars {
        rb.add_var_attrs(v)?;
    }
    for c in constraints {
        rb.add_constraint(c)?;
    }
    let mut a_mat = Triplets::default();
    let mut b_mat = Triplets::default();
    let mut cvec = Vec::new();
    let mut cones = Vec::new();
    for blk in &rb.blocks {
        for r in &blk.rows {
            let row = cvec.len();
            for &(j, v) in &r.terms {
                if j < main_dim {
                    a_mat.rows.push(row);
                    a_mat.cols.push(j);
                    a_mat.vals.push(-v);
                } else {
                    b_mat.rows.push(row);
                    b_mat.cols.push(j - main_dim);
                    b_mat.vals.push(-v);
                }
            }
            cvec.push(r.constant);
        }
        cones.push(blk.cone);
    }
    a_mat.shape = (cvec.len(), main_dim);
    b_mat.shape = (cvec.len(), rb.ncols - main_dim);
    Ok(SetRep { a_mat, b_mat, c: cvec, cones, main_dim })
}

fn column_map(child: &RowBuilder, parent: &mut RowBuilder) -> Vec<usize> {
    let mut map = vec![usize::MAX; child.ncols];
    for (v, s) in child.bound_vars() {
        let ps = match parent.column_of(&v) {
            Some(p) => p,
            None => parent.bind(&v),
        };
        for i in 0..v.size() {
            map[s + i] = ps + i;
        }
    }
    for slot in map.iter_mut() {
        if *slot == usize::MAX {
            *slot = parent.ncols;
            parent.ncols += 1;
        }
    }
    map
}

fn remap_block(blk: &ConeRows, map: &[usize]) -> ConeRows {
    ConeRows { cone: blk.cone, rows: blk.rows.iter().map(|r| r.remap(|c| map[c])).collect() }
}

fn internal(msg: &str) -> CanonError {
    CanonError::Unsupported(msg.to_string())
}

/// Build the conic form of `scale · e`, with `concave` deciding the side of
/// each variable.
pub fn build_form(e: &Expr, concave: ConcaveSide<'_>, scale: f64) -> Result<SaddleConicForm, CanonError> {
    let mut form = SaddleConicForm::new();
    add_term(&mut form, e, concave, scale)?;
    form.sync_f();
    Ok(form)
}

fn add_term(form: &mut SaddleConicForm, e: &Expr, concave: ConcaveSide<'_>, c: f64) -> Result<(), CanonError> {
    if c == 0.0 {
        return Ok(());
    }
    let scalar = e.shape().is_scalar();
    match e.kind() {
        ExprKind::Add if scalar => {
            for k in e.children() {
                add_term(form, k, concave, c)?;
            }
            Ok(())
        }
        ExprKind::Neg if scalar => add_term(form, &e.children()[0], concave, -c),
        ExprKind::Scale(s) if scalar => add_term(form, &e.children()[0], concave, c * s),
        ExprKind::Sum | ExprKind::Reshape | ExprKind::Index(_) if e.children()[0].shape().is_scalar() => {
            add_term(form, &e.children()[0], concave, c)
        }
        ExprKind::Saddle(atom) if !e.is_constant() => {
            if c > 0.0 {
                add_atom(form, atom, e, concave, c)
            } else {
                // -|c|·atom: build the atom with its own sides swapped into
                // our frame, then negate.
                let flipped = |v: &VariableDecl| !concave(v);
                let mut sub = SaddleConicForm::new();
                add_atom(&mut sub, atom, e, &flipped, -c)?;
                sub.sync_f();
                let neg = negate_form(&sub);
                form.merge(&neg);
                Ok(())
            }
        }
        _ => add_leaf(form, e, concave, c),
    }
}

/// A term without saddle atoms at the top: lowered on whichever side its
/// variables live on.
fn add_leaf(form: &mut SaddleConicForm, e: &Expr, concave: ConcaveSide<'_>, c: f64) -> Result<(), CanonError> {
    if e.has_saddle_atom() {
        return Err(CanonError::NotDcp(vec![Diagnostic::new(
            DiagnosticCode::CurvatureViolation,
            &[],
            format!("saddle expression inside `{e}`"),
        )]));
    }
    let vars = e.variables();
    let n_conc = vars.iter().filter(|v| concave(v)).count();
    if n_conc == 0 {
        let b = if c > 0.0 { Bound::Upper } else { Bound::Lower };
        let lowered = form.xs.lower(e, b)?;
        let mut sum = Affine::zero();
        lowered.iter().for_each(|a| sum.add_scaled(a, 1.0));
        form.t.add_scaled(&sum, c);
        form.sync_f();
        Ok(())
    } else if n_conc == vars.len() {
        let b = if c > 0.0 { Bound::Lower } else { Bound::Upper };
        let lowered = form.ys.lower(e, b)?;
        let mut sum = Affine::zero();
        lowered.iter().for_each(|a| sum.add_scaled(a, 1.0));
        form.add_concave_affine(&sum, c);
        Ok(())
    } else if e.is_affine() {
        // split an affine term between the two sides
        let mut tmp = RowBuilder::auto();
        let lowered = tmp.lower(e, Bound::Exact)?;
        let mut sum = Affine::zero();
        lowered.iter().for_each(|a| sum.add_scaled(a, 1.0));
        let mut owner = vec![None; tmp.ncols];
        for (v, s) in tmp.bound_vars() {
            for i in 0..v.size() {
                owner[s + i] = Some((v.clone(), i));
            }
        }
        let mut xpart = Affine::constant(sum.constant);
        let mut ypart = Affine::zero();
        for &(col, coef) in &sum.terms {
            let (v, i) = owner[col].clone().ok_or_else(|| internal("affine split met an auxiliary column"))?;
            if concave(&v) {
                let s = form.ys.bind(&v);
                ypart.add_term(s + i, coef);
            } else {
                let s = form.xs.bind(&v);
                xpart.add_term(s + i, coef);
            }
        }
        form.t.add_scaled(&xpart, c);
        form.add_concave_affine(&ypart, c);
        Ok(())
    } else {
        Err(CanonError::NotDcp(vec![Diagnostic::new(
            DiagnosticCode::MixedVariables,
            &[],
            format!("non-affine term `{e}` mixes convex and concave variables"),
        )]))
    }
}

/// Add `c · atom(F, G)` (c > 0) with F on the convex side, G on the concave
/// side of `form`.
fn add_atom(
    form: &mut SaddleConicForm,
    atom: &SaddleAtom,
    e: &Expr,
    _concave: ConcaveSide<'_>,
    c: f64,
) -> Result<(), CanonError> {
    let (fe, ge) = (&e.children()[0], &e.children()[1]);
    let fb = if fe.is_affine() { Bound::Exact } else { Bound::Upper };
    let gb = if ge.is_affine() { Bound::Exact } else { Bound::Lower };
    let a = form.xs.lower(fe, fb)?;
    let b = form.ys.lower(ge, gb)?;
    form.sync_f();
    let one = Affine::constant(1.0);
    match atom {
        SaddleAtom::Inner | SaddleAtom::SaddleInner => form.pair(&a, &b, c),
        SaddleAtom::WeightedNorm2 => {
            let n = a.len();
            let g = form.xs.new_aux(n);
            let s = form.xs.new_aux(1).pop().unwrap();
            for i in 0..n {
                form.xs.push(ConeRows::soc(vec![
                    g[i].plus(&s),
                    a[i].scaled(core::f64::consts::SQRT_2),
                    g[i].minus(&s),
                ]));
            }
            form.pair(&g, &b, c);
            form.t.add_scaled(&s, 0.5 * c);
        }
        SaddleAtom::WeightedLogSumExp => {
            let n = a.len();
            let g = form.xs.new_aux(n);
            let s = form.xs.new_aux(1).pop().unwrap();
            for i in 0..n {
                form.xs.push(ConeRows::exp(a[i].minus(&s), one.clone(), g[i].clone()));
            }
            form.pair(&g, &b, c);
            form.t.add_scaled(&s.minus(&one), c);
        }
        SaddleAtom::QuasidefQuadForm { p, q, s } => {
            let n = a.len();
            let m = b.len();
            // xᵀPx through an epigraph of ‖F x‖² with FᵀF = P
            let fac = psd_factor(p, 1e-12);
            if fac.rows > 0 {
                let tau = form.xs.new_aux(1).pop().unwrap();
                let mut rows = vec![tau.plus(&one)];
                for r in 0..fac.rows {
                    let mut fa = Affine::zero();
                    for j in 0..n {
                        fa.add_scaled(&a[j], 2.0 * fac.get(r, j));
                    }
                    rows.push(fa);
                }
                rows.push(tau.minus(&one));
                form.xs.push(ConeRows::soc(rows));
                form.t.add_scaled(&tau, c);
            }
            // 2 xᵀS y
            let mut g: Vec<Affine> = (0..m)
                .map(|k| {
                    let mut acc = Affine::zero();
                    for i in 0..n {
                        acc.add_scaled(&a[i], 2.0 * s.get(i, k));
                    }
                    acc
                })
                .collect();
            // yᵀQy = inf_{h, κ} { κ + hᵀN y | ‖h‖² ≤ 4κ } with NᵀN = -Q
            let nfac = psd_factor(&q.scaled(-1.0), 1e-12);
            if nfac.rows > 0 {
                let h = form.xs.new_aux(nfac.rows);
                let kappa = form.xs.new_aux(1).pop().unwrap();
                let mut rows = vec![kappa.plus(&one)];
                rows.extend(h.iter().cloned());
                rows.push(kappa.minus(&one));
                form.xs.push(ConeRows::soc(rows));
                for (k, gk) in g.iter_mut().enumerate() {
                    for (r, hr) in h.iter().enumerate() {
                        gk.add_scaled(hr, nfac.get(r, k));
                    }
                }
                form.t.add_scaled(&kappa, c);
            }
            form.pair(&g, &b, c);
        }
        SaddleAtom::SaddleQuadForm => {
            let n = a.len();
            // G symmetric auxiliary, upper triangle columns
            let entries = svec_entries(n);
            let gcols = form.xs.new_aux(entries.len());
            let mut gidx = BTreeMap::new();
            for (k, &(i, j)) in entries.iter().enumerate() {
                gidx.insert((i, j), k);
            }
            let g_at = |i: usize, j: usize| gcols[gidx[&(i.min(j), i.max(j))]].clone();
            let mut psd_rows = Vec::new();
            for (i, j) in svec_entries(n + 1) {
                let v = if j < n {
                    g_at(i, j)
                } else if i < n {
                    a[i].clone()
                } else {
                    one.clone()
                };
                psd_rows.push(if i == j { v } else { v.scaled(core::f64::consts::SQRT_2) });
            }
            form.xs.push(ConeRows::new(Cone::psd(n + 1), psd_rows));
            let g: Vec<Affine> = (0..n * n).map(|k| g_at(k % n, k / n)).collect();
            form.pair(&g, &b, c);
        }
    }
    Ok(())
}

/// Form of `-φ` with the sides exchanged: the old concave columns (and new
/// multipliers μ) form the convex side, the old convex variables the
/// concave side. The inner `inf_w` is replaced by its conic dual.
pub fn negate_form(form: &SaddleConicForm) -> SaddleConicForm {
    let xs = &form.xs;
    let mut is_var = vec![false; xs.ncols];
    for (v, s) in xs.bound_vars() {
        for i in 0..v.size() {
            is_var[s + i] = true;
        }
    }
    let mut out = SaddleConicForm::new();
    // new concave side: old convex variables, same relative layout
    let mut ymap = vec![usize::MAX; xs.ncols];
    for (v, s) in xs.bound_vars() {
        let ns = out.ys.bind(&v);
        for i in 0..v.size() {
            ymap[s + i] = ns + i;
        }
    }
    // new convex side: old concave columns (variables keep identity)
    let ymap_old = column_map(&form.ys, &mut out.xs);
    for blk in &form.ys.blocks {
        out.xs.push(remap_block(blk, &ymap_old));
    }
    // split old rows into pure-variable rows (concave-side domain) and the rest
    let mut dual_blocks = Vec::new();
    for blk in &form.xs.blocks {
        let pure = blk.rows.iter().all(|r| r.terms.iter().all(|&(c, _)| is_var[c]));
        if pure {
            out.ys.push(remap_block(blk, &ymap));
        } else {
            dual_blocks.push(blk);
        }
    }
    // multipliers μ for the remaining rows
    let mut mus: Vec<(Vec<Affine>, &ConeRows)> = Vec::new();
    for blk in dual_blocks {
        let mu = out.xs.new_aux(blk.rows.len());
        let dual = dual_cone(blk.cone);
        if dual.kind != ConeKind::Free {
            out.xs.push(ConeRows::new(dual, mu.clone()));
        }
        mus.push((mu, blk));
    }
    out.sync_f();
    let yhat: Vec<Affine> = (0..form.ys.ncols).map(|j| Affine::column(ymap_old[j])).collect();
    // coefficient of old column `col` in  -Σ ŷ_j f_j - t + Σ μ_r S_r
    let coef_of = |col: usize| -> Affine {
        let mut acc = Affine::zero();
        for (j, fj) in form.f.iter().enumerate() {
            let v = fj.coef(col);
            if v != 0.0 {
                acc.add_scaled(&yhat[j], -v);
            }
        }
        let h = form.t.coef(col);
        acc.constant -= h;
        for (mu, blk) in &mus {
            for (r, row) in blk.rows.iter().enumerate() {
                let v = row.coef(col);
                if v != 0.0 {
                    acc.add_scaled(&mu[r], v);
                }
            }
        }
        acc
    };
    let mut eq_rows = Vec::new();
    for col in 0..xs.ncols {
        let acc = coef_of(col);
        if is_var[col] {
            out.f[ymap[col]].add_scaled(&acc, 1.0);
        } else {
            eq_rows.push(acc);
        }
    }
    eq_rows.retain(|r| !(r.terms.is_empty() && r.constant == 0.0));
    out.xs.push(ConeRows::zero(eq_rows));
    // constant part
    let mut t = Affine::constant(-form.t.constant);
    for (j, fj) in form.f.iter().enumerate() {
        if fj.constant != 0.0 {
            t.add_scaled(&yhat[j], -fj.constant);
        }
    }
    for (mu, blk) in &mus {
        for (r, row) in blk.rows.iter().enumerate() {
            if row.constant != 0.0 {
                t.add_scaled(&mu[r], row.constant);
            }
        }
    }
    out.t = t;
    out
}

/// Dualize `form` (whose concave side already carries the set rows) into
/// `parent`. Returns the affine epigraph handle `t + g0ᵀλ` over `parent`
/// columns: the saddle max is the infimum of the handle over the added
/// auxiliaries.
pub fn dualize_into(form: &SaddleConicForm, parent: &mut RowBuilder) -> Result<Affine, CanonError> {
    let xmap = column_map(&form.xs, parent);
    for blk in &form.xs.blocks {
        parent.push(remap_block(blk, &xmap));
    }
    let mut handle = form.t.remap(|c| xmap[c]);
    // equality rows Gᵀλ + f = 0, one per concave column
    let mut eq: Vec<Affine> = form.f.iter().map(|fj| fj.remap(|c| xmap[c])).collect();
    eq.resize(form.ys.ncols, Affine::zero());
    for blk in &form.ys.blocks {
        let lam = parent.new_aux(blk.rows.len());
        let dual = dual_cone(blk.cone);
        if dual.kind != ConeKind::Free {
            parent.push(ConeRows::new(dual, lam.clone()));
        }
        for (r, row) in blk.rows.iter().enumerate() {
            for &(j, v) in &row.terms {
                eq[j].add_scaled(&lam[r], v);
            }
            if row.constant != 0.0 {
                handle.add_scaled(&lam[r], row.constant);
            }
        }
    }
    eq.retain(|r| !(r.terms.is_empty() && r.constant == 0.0));
    parent.push(ConeRows::zero(eq));
    Ok(handle)
}

/// Explicit epigraph system of a saddle max: rows over
/// `[x | u_epi | auxiliaries]` whose projection onto `(x, u_epi)` is the
/// epigraph of the saddle max.
#[derive(Clone, Debug)]
pub struct EpigraphRep {
    pub rows: RowBuilder,
    pub u_epi: usize,
}

/// Dualize a saddle max with concave-side set `yset` into an explicit
/// epigraph representation.
pub fn dualize_saddle_max(form: &SaddleConicForm, yset: &[Constraint]) -> Result<EpigraphRep, CanonError> {
    let mut f = form.clone();
    f.add_set(yset)?;
    let mut rb = RowBuilder::auto();
    for (v, _) in form.xs.bound_vars() {
        rb.bind(&v);
    }
    let u = rb.new_named("u_epi", 1);
    let handle = dualize_into(&f, &mut rb)?;
    rb.push(ConeRows::nonneg(vec![Affine::column(u).minus(&handle)]));
    Ok(EpigraphRep { rows: rb, u_epi: u })
}

/// Hypograph of a saddle min: `inf_x φ(x, y)` over `xset`, obtained from the
/// saddle max of `-φ` with sides swapped. The returned column holds a lower
/// bound of the saddle min (`u_hyp <= inf_x φ`).
pub fn dualize_saddle_min(body: &Expr, convex_locals: ConcaveSide<'_>, xset: &[Constraint]) -> Result<EpigraphRep, CanonError> {
    let form = build_form(body, convex_locals, -1.0)?;
    let mut epi = dualize_saddle_max(&form, xset)?;
    // u_epi >= sup(-φ)  ⟺  -u_epi <= inf φ; expose -u_epi through a new column
    let u = epi.rows.new_named("u_hyp", 1);
    let prev = epi.u_epi;
    epi.rows.push(ConeRows::zero(vec![Affine::column(u).plus(&Affine::column(prev))]));
    epi.u_epi = u;
    Ok(epi)
}

/// Lower a saddle extremum node into `parent`. A saddle max returns an upper
/// bound handle, a saddle min a lower bound handle.
pub fn lower_extremum(parent: &mut RowBuilder, se: &Extremum) -> Result<Affine, CanonError> {
    let locals: BTreeMap<u64, ()> = se.locals.iter().map(|v| (v.id(), ())).collect();
    let is_local = |v: &VariableDecl| locals.contains_key(&v.id());
    let scale = if se.direction.is_max() { 1.0 } else { -1.0 };
    let mut form = build_form(&se.body, &is_local, scale)?;
    let (local_cons, outer_cons) = split_attached(&se.body, &is_local);
    for c in &outer_cons {
        parent.add_constraint(c)?;
    }
    let mut set = se.constraints.clone();
    set.extend(local_cons);
    form.bind_concave(&se.locals)?;
    form.add_set(&set)?;
    let handle = dualize_into(&form, parent)?;
    Ok(if se.direction.is_max() { handle } else { handle.neg() })
}

/// Attached atom constraints of `e`, split into those on `side` variables
/// and the rest.
pub fn split_attached(e: &Expr, side: ConcaveSide<'_>) -> (Vec<Constraint>, Vec<Constraint>) {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for c in collect_attached(e) {
        let vars = c.variables();
        if !vars.is_empty() && vars.iter().all(|v| side(v)) {
            inside.push(c);
        } else if !vars.is_empty() {
            outside.push(c);
        }
    }
    (inside, outside)
}

/// All constraints attached by saddle atoms in `e` (not descending into
/// saddle extremum bodies).
pub fn collect_attached(e: &Expr) -> Vec<Constraint> {
    let mut out = Vec::new();
    e.walk(&mut |node, _| out.extend(node.attached_constraints().iter().cloned()));
    out
}

/// Column ranges `name -> (start, len)` of the bound variables of `rb`.
pub fn var_ranges(rb: &RowBuilder) -> Vec<VarRange> {
    rb.ranges.clone()
}
