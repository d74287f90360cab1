//! Cones, standard-form cone programs and the solver adapter contract.
//!
//! A [`ConeProgram`] means: minimize `cᵀz + offset` subject to
//! `A z + s = b`, `s ∈ K`, where `K` is the product of `cones` in order.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::E;

use crate::affine::Affine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConeKind {
    /// `{0}`
    Zero,
    /// Unrestricted rows (the dual of `Zero`).
    Free,
    NonNeg,
    /// `{(t, x) : ‖x‖₂ ≤ t}`
    SecondOrder,
    /// Closure of `{(x, y, z) : y > 0, y·exp(x/y) ≤ z}`.
    Exponential,
    /// Closure of `{(u, v, w) : u < 0, -u·exp(v/u) ≤ e·w}`.
    DualExponential,
    /// Packed upper triangle of an `n x n` PSD matrix, off-diagonals × √2.
    PsdTriangle,
}

impl ConeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::Free => "free",
            ConeKind::NonNeg => "nonneg",
            ConeKind::SecondOrder => "soc",
            ConeKind::Exponential => "exp",
            ConeKind::DualExponential => "dual_exp",
            ConeKind::PsdTriangle => "psd_triangle",
        }
    }

    pub fn parse(s: &str) -> Option<ConeKind> {
        [
            ConeKind::Zero,
            ConeKind::Free,
            ConeKind::NonNeg,
            ConeKind::SecondOrder,
            ConeKind::Exponential,
            ConeKind::DualExponential,
            ConeKind::PsdTriangle,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

/// A cone block. `dim` is the block length, except for `PsdTriangle` where it
/// is the matrix order `n` and the block has `n(n+1)/2` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cone {
    pub kind: ConeKind,
    pub dim: usize,
}

impl Cone {
    pub fn zero(dim: usize) -> Cone {
        Cone { kind: ConeKind::Zero, dim }
    }

    pub fn free(dim: usize) -> Cone {
        Cone { kind: ConeKind::Free, dim }
    }

    pub fn nonneg(dim: usize) -> Cone {
        Cone { kind: ConeKind::NonNeg, dim }
    }

    pub fn soc(dim: usize) -> Cone {
        Cone { kind: ConeKind::SecondOrder, dim }
    }

    pub fn exp() -> Cone {
        Cone { kind: ConeKind::Exponential, dim: 3 }
    }

    pub fn dual_exp() -> Cone {
        Cone { kind: ConeKind::DualExponential, dim: 3 }
    }

    pub fn psd(order: usize) -> Cone {
        Cone { kind: ConeKind::PsdTriangle, dim: order }
    }

    /// Number of rows the block occupies.
    pub fn len(&self) -> usize {
        match self.kind {
            ConeKind::PsdTriangle => self.dim * (self.dim + 1) / 2,
            _ => self.dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Membership test with tolerance `tol`.
    pub fn contains(&self, s: &[f64], tol: f64) -> bool {
        debug_assert_eq!(s.len(), self.len());
        match self.kind {
            ConeKind::Zero => s.iter().all(|v| v.abs() <= tol),
            ConeKind::Free => true,
            ConeKind::NonNeg => s.iter().all(|&v| v >= -tol),
            ConeKind::SecondOrder => {
                let n: f64 = s[1..].iter().map(|v| v * v).sum();
                libm::sqrt(n) <= s[0] + tol
            }
            ConeKind::Exponential => {
                let (x, y, z) = (s[0], s[1], s[2]);
                if y > tol {
                    y * libm::exp(x / y) <= z + tol
                } else {
                    y >= -tol && x <= tol && z >= -tol
                }
            }
            ConeKind::DualExponential => {
                let (u, v, w) = (s[0], s[1], s[2]);
                if u < -tol {
                    -u * libm::exp(v / u) <= E * w + tol
                } else {
                    u <= tol && v >= -tol && w >= -tol
                }
            }
            ConeKind::PsdTriangle => {
                let n = self.dim;
                let m = crate::expr::Matrix { rows: n, cols: n, data: smat(n, s) };
                crate::linalg::min_eigenvalue(&m) >= -tol
            }
        }
    }
}

/// Inverse of svec: full symmetric column-major matrix from a packed triangle.
pub fn smat(n: usize, packed: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j { packed[k] } else { packed[k] / core::f64::consts::SQRT_2 };
            out[i + j * n] = v;
            out[j + i * n] = v;
            k += 1;
        }
    }
    out
}

/// The dual cone `K* = {z : ⟨s, z⟩ ≥ 0 for all s ∈ K}`.
pub fn dual_cone(k: Cone) -> Cone {
    let kind = match k.kind {
        ConeKind::Zero => ConeKind::Free,
        ConeKind::Free => ConeKind::Zero,
        ConeKind::Exponential => ConeKind::DualExponential,
        ConeKind::DualExponential => ConeKind::Exponential,
        other => other,
    };
    Cone { kind, dim: k.dim }
}

/// A cone block whose slack entries are affine functions of the columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeRows {
    pub cone: Cone,
    pub rows: Vec<Affine>,
}

impl ConeRows {
    pub fn new(cone: Cone, rows: Vec<Affine>) -> ConeRows {
        debug_assert_eq!(cone.len(), rows.len());
        ConeRows { cone, rows }
    }

    pub fn nonneg(rows: Vec<Affine>) -> ConeRows {
        ConeRows { cone: Cone::nonneg(rows.len()), rows }
    }

    pub fn zero(rows: Vec<Affine>) -> ConeRows {
        ConeRows { cone: Cone::zero(rows.len()), rows }
    }

    pub fn soc(rows: Vec<Affine>) -> ConeRows {
        ConeRows { cone: Cone::soc(rows.len()), rows }
    }

    pub fn exp(x: Affine, y: Affine, z: Affine) -> ConeRows {
        ConeRows { cone: Cone::exp(), rows: vec![x, y, z] }
    }

    pub fn is_satisfied(&self, z: &[f64], tol: f64) -> bool {
        let s: Vec<f64> = self.rows.iter().map(|r| r.eval(z)).collect();
        self.cone.contains(&s, tol)
    }
}

/// Sparse matrix in triplet form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triplets {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub shape: (usize, usize),
}

impl Triplets {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.0];
        for k in 0..self.vals.len() {
            out[self.rows[k]] += self.vals[k] * z[self.cols[k]];
        }
        out
    }

    /// Entries grouped by column (CSC order), rows ascending within a column.
    pub fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.shape.1;
        let mut order: Vec<usize> = (0..self.vals.len()).collect();
        order.sort_by_key(|&k| (self.cols[k], self.rows[k]));
        let mut colptr = vec![0usize; n + 1];
        let mut rowval = Vec::with_capacity(order.len());
        let mut nzval = Vec::with_capacity(order.len());
        for &k in &order {
            colptr[self.cols[k] + 1] += 1;
            rowval.push(self.rows[k]);
            nzval.push(self.vals[k]);
        }
        for j in 0..n {
            colptr[j + 1] += colptr[j];
        }
        (colptr, rowval, nzval)
    }
}

/// Column range of a variable (or named auxiliary block) in a cone program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarRange {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConeProgram {
    pub c: Vec<f64>,
    /// Constant added to the objective.
    pub offset: f64,
    pub a: Triplets,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub var_index: Vec<VarRange>,
}

/// Sort `ranges` by start and cover the unnamed gaps with `_aux` ranges so
/// the index partitions `0..ncols`.
fn fill_ranges(mut ranges: Vec<VarRange>, ncols: usize) -> Vec<VarRange> {
    ranges.sort_by_key(|r| r.start);
    let mut out = Vec::with_capacity(ranges.len() * 2 + 1);
    let mut next = 0;
    for r in ranges {
        if r.start > next {
            out.push(VarRange { name: "_aux".into(), start: next, len: r.start - next });
        }
        next = r.start + r.len;
        out.push(r);
    }
    if next < ncols {
        out.push(VarRange { name: "_aux".into(), start: next, len: ncols - next });
    }
    out
}

impl ConeProgram {
    /// Assemble from an affine objective and cone blocks over `ncols` columns.
    /// Adjacent `Zero`, `NonNeg` and `Free` blocks are merged.
    pub fn from_rows(objective: &Affine, blocks: &[ConeRows], ncols: usize, var_index: Vec<VarRange>) -> ConeProgram {
        let mut c = vec![0.0; ncols];
        for &(j, v) in &objective.terms {
            c[j] += v;
        }
        let mut a = Triplets { shape: (0, ncols), ..Triplets::default() };
        let mut b = Vec::new();
        let mut cones: Vec<Cone> = Vec::new();
        for blk in blocks {
            if blk.rows.is_empty() {
                continue;
            }
            for row in &blk.rows {
                let r = b.len();
                for &(j, v) in &row.terms {
                    a.rows.push(r);
                    a.cols.push(j);
                    a.vals.push(-v);
                }
                b.push(row.constant);
            }
            let mergeable = matches!(blk.cone.kind, ConeKind::Zero | ConeKind::NonNeg | ConeKind::Free);
            match cones.last_mut() {
                Some(last) if mergeable && last.kind == blk.cone.kind => last.dim += blk.cone.dim,
                _ => cones.push(blk.cone),
            }
        }
        a.shape = (b.len(), ncols);
        ConeProgram { c, offset: objective.constant, a, b, cones, var_index: fill_ranges(var_index, ncols) }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn needs_psd(&self) -> bool {
        self.cones.iter().any(|k| k.kind == ConeKind::PsdTriangle)
    }

    /// Structural validity: dimensions agree and every cone is well formed.
    pub fn validate(&self) -> Result<(), String> {
        let rows: usize = self.cones.iter().map(Cone::len).sum();
        if rows != self.b.len() || self.a.shape.0 != self.b.len() {
            return Err(alloc::format!("cone rows {rows} != rows of A {} / b {}", self.a.shape.0, self.b.len()));
        }
        if self.a.shape.1 != self.c.len() {
            return Err("columns of A do not match c".into());
        }
        if self.a.rows.iter().any(|&r| r >= self.a.shape.0) || self.a.cols.iter().any(|&c| c >= self.a.shape.1) {
            return Err("triplet index out of range".into());
        }
        for k in &self.cones {
            if k.dim == 0 {
                return Err("empty cone block".into());
            }
            if matches!(k.kind, ConeKind::Exponential | ConeKind::DualExponential) && k.dim != 3 {
                return Err("exponential cone blocks must have length 3".into());
            }
        }
        Ok(())
    }

    /// Primal objective value including the offset.
    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.offset + self.c.iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Slack `b - A z`.
    pub fn slack(&self, z: &[f64]) -> Vec<f64> {
        let az = self.a.mul_vec(z);
        self.b.iter().zip(az).map(|(b, a)| b - a).collect()
    }

    /// Whether `z` satisfies all cone constraints within `tol`.
    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        let s = self.slack(z);
        let mut k = 0;
        for cone in &self.cones {
            let len = cone.len();
            if !cone.contains(&s[k..k + len], tol) {
                return false;
            }
            k += len;
        }
        true
    }

    pub fn range_of(&self, name: &str) -> Option<&VarRange> {
        self.var_index.iter().find(|r| r.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalError,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::NumericalError => "NumericalError",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    /// `cᵀ·primal` (the program offset is not included).
    pub obj: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_feas: 1e-9, tol_gap_abs: 1e-9, tol_gap_rel: 1e-9, max_iter: 200, verbose: false }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("backend `{backend}` does not support {capability} cones")]
    Capability { backend: String, capability: &'static str },
    #[error("malformed cone program: {0}")]
    Malformed(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// A cone program solver. Implementations must handle `Zero`, `Free`,
/// `NonNeg`, `SecondOrder`, `Exponential` and `DualExponential` blocks;
/// `PsdTriangle` support is declared through [`ConeSolver::supports_psd`].
pub trait ConeSolver {
    fn name(&self) -> &str;

    fn supports_psd(&self) -> bool;

    /// Whether concurrent calls to [`ConeSolver::solve`] are allowed.
    fn thread_safe(&self) -> bool {
        false
    }

    fn solve(&self, program: &ConeProgram, opts: &SolverOptions) -> Result<Solution, SolverError>;
}

impl<S: ConeSolver + ?Sized> ConeSolver for Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn supports_psd(&self) -> bool {
        (**self).supports_psd()
    }
    fn thread_safe(&self) -> bool {
        (**self).thread_safe()
    }
    fn solve(&self, program: &ConeProgram, opts: &SolverOptions) -> Result<Solution, SolverError> {
        (**self).solve(program, opts)
    }
}

impl<S: ConeSolver + ?Sized> ConeSolver for &S {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn supports_psd(&self) -> bool {
        (**self).supports_psd()
    }
    fn thread_safe(&self) -> bool {
        (**self).thread_safe()
    }
    fn solve(&self, program: &ConeProgram, opts: &SolverOptions) -> Result<Solution, SolverError> {
        (**self).solve(program, opts)
    }
}

/// Validate `program`, check capabilities, and run the backend.
pub fn solve_cone(solver: &dyn ConeSolver, program: &ConeProgram, opts: &SolverOptions) -> Result<Solution, SolverError> {
    program.validate().map_err(SolverError::Malformed)?;
    if program.needs_psd() && !solver.supports_psd() {
        return Err(SolverError::Capability { backend: solver.name().into(), capability: "PSD" });
    }
    solver.solve(program, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_involution() {
        for k in [
            Cone::zero(2),
            Cone::free(2),
            Cone::nonneg(5),
            Cone::soc(4),
            Cone::exp(),
            Cone::dual_exp(),
            Cone::psd(3),
        ] {
            assert_eq!(dual_cone(dual_cone(k)), k);
        }
        assert_eq!(dual_cone(Cone::nonneg(5)), Cone::nonneg(5));
        assert_eq!(dual_cone(Cone::soc(4)), Cone::soc(4));
        assert_eq!(dual_cone(Cone::exp()).kind, ConeKind::DualExponential);
    }

    #[test]
    fn assembly_merges_blocks() {
        let x = Affine::column(0);
        let blocks = [
            ConeRows::nonneg(vec![x.clone()]),
            ConeRows::nonneg(vec![Affine::constant(1.0).minus(&x)]),
            ConeRows::zero(vec![x.minus(&Affine::constant(0.5))]),
        ];
        let p = ConeProgram::from_rows(&Affine::column(0), &blocks, 1, vec![]);
        assert_eq!(p.cones, vec![Cone::nonneg(2), Cone::zero(1)]);
        assert_eq!(p.b, vec![0.0, 1.0, -0.5]);
        assert!(p.validate().is_ok());
        assert!(p.is_feasible(&[0.5], 1e-12));
        assert!(!p.is_feasible(&[0.7], 1e-12));
    }

    #[test]
    fn csc_layout() {
        let t = Triplets { rows: vec![1, 0, 0], cols: vec![0, 1, 0], vals: vec![2.0, 3.0, 1.0], shape: (2, 2) };
        let (cp, rv, nz) = t.to_csc();
        assert_eq!(cp, vec![0, 2, 3]);
        assert_eq!(rv, vec![0, 1, 0]);
        assert_eq!(nz, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn cone_membership() {
        assert!(Cone::exp().contains(&[0.0, 1.0, 1.0], 1e-12));
        assert!(!Cone::exp().contains(&[1.0, 1.0, 2.0], 1e-12));
        assert!(Cone::dual_exp().contains(&[-1.0, 0.0, 1.0 / E], 1e-12));
        assert!(Cone::soc(3).contains(&[5.0, 3.0, 4.0], 1e-12));
        assert!(Cone::psd(2).contains(&[1.0, 0.0, 1.0], 1e-12));
        assert!(!Cone::psd(2).contains(&[1.0, 2.0, 1.0], 1e-12));
    }

    fn exp_point(x: f64, y: f64, t: f64) -> [f64; 3] {
        [x, y, y * libm::exp(x / y) + t]
    }

    fn dual_exp_point(u: f64, v: f64, t: f64) -> [f64; 3] {
        [u, v, -u * libm::exp(v / u) / E + t]
    }

    proptest::proptest! {
        #[test]
        fn exp_pairs_have_nonnegative_inner_product(
            x in -3.0f64..3.0, y in 0.05f64..3.0, t in 0.0f64..2.0,
            u in -3.0f64..-0.05, v in -3.0f64..3.0, r in 0.0f64..2.0,
        ) {
            let s = exp_point(x, y, t);
            let z = dual_exp_point(u, v, r);
            proptest::prop_assert!(Cone::exp().contains(&s, 1e-9));
            proptest::prop_assert!(Cone::dual_exp().contains(&z, 1e-9));
            let ip: f64 = s.iter().zip(&z).map(|(a, b)| a * b).sum();
            proptest::prop_assert!(ip >= -1e-9 * (1.0 + s[2].abs() * z[2].abs()), "{ip}");
        }

        #[test]
        fn soc_is_self_dual_on_samples(a in proptest::collection::vec(-2.0f64..2.0, 3), b in proptest::collection::vec(-2.0f64..2.0, 3), ta in 0.0f64..1.0, tb in 0.0f64..1.0) {
            let na = libm::sqrt(a.iter().map(|v| v * v).sum());
            let nb = libm::sqrt(b.iter().map(|v| v * v).sum());
            let s: Vec<f64> = core::iter::once(na + ta).chain(a.iter().copied()).collect();
            let z: Vec<f64> = core::iter::once(nb + tb).chain(b.iter().copied()).collect();
            let ip: f64 = s.iter().zip(&z).map(|(p, q)| p * q).sum();
            proptest::prop_assert!(ip >= -1e-12);
        }

        #[test]
        fn psd_triangle_inner_product_is_trace(m in proptest::collection::vec(-1.0f64..1.0, 4), n in proptest::collection::vec(-1.0f64..1.0, 4)) {
            // svec is an isometry: <svec A, svec B> = tr(A B) for symmetric A, B
            let sym = |v: &[f64]| [v[0], 0.5 * (v[1] + v[2]), 0.5 * (v[1] + v[2]), v[3]];
            let (a, b) = (sym(&m), sym(&n));
            let r2 = core::f64::consts::SQRT_2;
            let sa = [a[0], r2 * a[2], a[3]];
            let sb = [b[0], r2 * b[2], b[3]];
            let tr = a[0] * b[0] + a[2] * b[1] + a[1] * b[2] + a[3] * b[3];
            let ip: f64 = sa.iter().zip(&sb).map(|(p, q)| p * q).sum();
            proptest::prop_assert!((ip - tr).abs() < 1e-12);
            proptest::prop_assert!(smat(2, &sa).iter().zip(&a).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }
}
