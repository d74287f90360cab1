//! Saddle atoms. Argument 0 is always the convex side, argument 1 the
//! concave side.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::DiagnosticCode;
use crate::expr::{Constraint, Curvature, Expr, ExprError, ExprKind, Matrix, Shape, Sign};
use crate::linalg::min_eigenvalue;

/// Eigenvalue floor used when checking `P ⪰ 0` and `Q ⪯ 0`.
pub const QUASIDEF_EIG_FLOOR: f64 = -1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum SaddleAtom {
    Inner,
    SaddleInner,
    WeightedNorm2,
    WeightedLogSumExp,
    QuasidefQuadForm { p: Arc<Matrix>, q: Arc<Matrix>, s: Arc<Matrix> },
    SaddleQuadForm,
}

/// What an atom slot accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRule {
    /// Affine arguments only.
    Affine,
    /// Convex (concave) arguments are accepted because the atom is
    /// nondecreasing in the slot; `needs_nonneg` marks slots where that only
    /// holds for nonnegative arguments.
    Nondecreasing { needs_nonneg: bool },
}

/// Static description of a saddle atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtomDescriptor {
    pub name: &'static str,
    pub convex_slot: SlotRule,
    pub concave_slot: SlotRule,
    /// The concave argument is constrained to be nonnegative (attached
    /// constraint when it is not provably so).
    pub concave_nonneg: bool,
}

impl SaddleAtom {
    pub fn name(&self) -> &'static str {
        self.descriptor().name
    }

    pub fn descriptor(&self) -> AtomDescriptor {
        use SlotRule::*;
        let (name, convex_slot, concave_slot, concave_nonneg) = match self {
            SaddleAtom::Inner => ("inner", Affine, Affine, false),
            SaddleAtom::SaddleInner => (
                "saddle_inner",
                Nondecreasing { needs_nonneg: false },
                Nondecreasing { needs_nonneg: false },
                false,
            ),
            SaddleAtom::WeightedNorm2 => {
                ("weighted_norm2", Nondecreasing { needs_nonneg: true }, Nondecreasing { needs_nonneg: false }, true)
            }
            SaddleAtom::WeightedLogSumExp => (
                "weighted_log_sum_exp",
                Nondecreasing { needs_nonneg: false },
                Nondecreasing { needs_nonneg: false },
                true,
            ),
            SaddleAtom::QuasidefQuadForm { .. } => ("quasidef_quad_form", Affine, Affine, false),
            SaddleAtom::SaddleQuadForm => ("saddle_quad_form", Affine, Affine, false),
        };
        AtomDescriptor { name, convex_slot, concave_slot, concave_nonneg }
    }

    /// Whether a non-affine convex argument in slot 0 is acceptable.
    pub fn convex_slot_accepts(&self, f: &Expr) -> bool {
        match self.descriptor().convex_slot {
            SlotRule::Affine => f.is_affine(),
            SlotRule::Nondecreasing { needs_nonneg } => {
                f.is_affine() || (f.is_convex() && (!needs_nonneg || f.sign().is_nonneg()))
            }
        }
    }

    /// Argument violations as `(slot, code, message)`.
    pub fn arg_violations(&self, f: &Expr, g: &Expr) -> Vec<(usize, DiagnosticCode, String)> {
        let name = self.name();
        let mut out = Vec::new();
        let d = self.descriptor();
        match d.convex_slot {
            SlotRule::Affine if !f.is_affine() => out.push((
                0,
                DiagnosticCode::CurvatureViolation,
                format!("{name}: convex-side argument must be affine, found {:?}", f.curvature()),
            )),
            SlotRule::Nondecreasing { needs_nonneg } if !f.is_affine() => {
                if !f.is_convex() {
                    out.push((
                        0,
                        DiagnosticCode::CurvatureViolation,
                        format!("{name}: convex-side argument must be convex, found {:?}", f.curvature()),
                    ));
                } else if needs_nonneg && !f.sign().is_nonneg() {
                    out.push((
                        0,
                        DiagnosticCode::MonotonicityViolation,
                        format!("{name}: non-affine convex-side argument must be nonnegative"),
                    ));
                }
            }
            _ => {}
        }
        match d.concave_slot {
            SlotRule::Affine if !g.is_affine() => out.push((
                1,
                DiagnosticCode::CurvatureViolation,
                format!("{name}: concave-side argument must be affine, found {:?}", g.curvature()),
            )),
            SlotRule::Nondecreasing { .. } if !g.is_affine() && !g.is_concave() => out.push((
                1,
                DiagnosticCode::CurvatureViolation,
                format!("{name}: concave-side argument must be concave, found {:?}", g.curvature()),
            )),
            _ => {}
        }
        // F(x)ᵀG(y) is nondecreasing in G only where F >= 0
        if *self == SaddleAtom::SaddleInner && !g.is_affine() && !f.sign().is_nonneg() {
            out.push((
                0,
                DiagnosticCode::MonotonicityViolation,
                format!("{name}: F must be provably nonnegative when G is not affine"),
            ));
        }
        if *self == SaddleAtom::SaddleQuadForm && !is_psd_matrix_expr(g) {
            out.push((
                1,
                DiagnosticCode::CurvatureViolation,
                format!("{name}: matrix argument must be a PSD variable or PSD constant"),
            ));
        }
        out
    }

    /// Numeric value at convex-side value `x` and concave-side value `y`.
    pub fn eval(&self, x: &[f64], y: &[f64], x_shape: Shape) -> f64 {
        match self {
            SaddleAtom::Inner | SaddleAtom::SaddleInner => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            SaddleAtom::WeightedNorm2 => libm::sqrt(x.iter().zip(y).map(|(a, b)| b * a * a).sum()),
            SaddleAtom::WeightedLogSumExp => {
                let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = x.iter().zip(y).map(|(a, b)| b * libm::exp(a - m)).sum();
                m + libm::log(s)
            }
            SaddleAtom::QuasidefQuadForm { p, q, s } => {
                let px = p.mul_vec(x);
                let sy = s.mul_vec(y);
                let qy = q.mul_vec(y);
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
                dot(x, &px) + 2.0 * dot(x, &sy) + dot(y, &qy)
            }
            SaddleAtom::SaddleQuadForm => {
                let n = x_shape.size();
                let ym = Matrix { rows: n, cols: n, data: y.to_vec() };
                let yx = ym.mul_vec(x);
                x.iter().zip(&yx).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Curvature when one side is constant (as after fixing its variables);
    /// `Unknown` when both sides vary.
    pub(crate) fn fixed_side_analysis(&self, children: &[Expr]) -> (Curvature, Sign) {
        let (f, g) = (&children[0], &children[1]);
        let sign = match self {
            SaddleAtom::WeightedNorm2 => Sign::NonNegative,
            SaddleAtom::Inner | SaddleAtom::SaddleInner => {
                if f.sign().is_nonneg() && g.sign().is_nonneg() {
                    Sign::NonNegative
                } else {
                    f.sign().mul(g.sign())
                }
            }
            _ => Sign::Unknown,
        };
        let curv = match (f.is_constant(), g.is_constant()) {
            (true, true) => Curvature::Constant,
            (false, false) => Curvature::Unknown,
            (false, true) => {
                let g_nonneg = g.sign().is_nonneg();
                match self {
                    SaddleAtom::Inner | SaddleAtom::SaddleInner if f.is_affine() => Curvature::Affine,
                    SaddleAtom::SaddleInner if f.is_convex() && g_nonneg => Curvature::Convex,
                    SaddleAtom::WeightedNorm2 | SaddleAtom::WeightedLogSumExp
                        if g_nonneg && self.convex_slot_accepts(f) =>
                    {
                        Curvature::Convex
                    }
                    SaddleAtom::QuasidefQuadForm { .. } | SaddleAtom::SaddleQuadForm if f.is_affine() => {
                        if self == &SaddleAtom::SaddleQuadForm && !is_psd_matrix_expr(g) {
                            Curvature::Unknown
                        } else {
                            Curvature::Convex
                        }
                    }
                    _ => Curvature::Unknown,
                }
            }
            (true, false) => {
                let f_nonneg = f.sign().is_nonneg();
                match self {
                    SaddleAtom::Inner | SaddleAtom::SaddleInner | SaddleAtom::SaddleQuadForm if g.is_affine() => {
                        Curvature::Affine
                    }
                    SaddleAtom::SaddleInner if g.is_concave() && f_nonneg => Curvature::Concave,
                    SaddleAtom::WeightedNorm2 | SaddleAtom::WeightedLogSumExp if g.is_concave() => {
                        Curvature::Concave
                    }
                    SaddleAtom::QuasidefQuadForm { .. } if g.is_affine() => Curvature::Concave,
                    _ => Curvature::Unknown,
                }
            }
        };
        (curv, sign)
    }
}

/// A PSD-attributed variable, a nonnegative multiple of one, or a constant
/// PSD matrix.
pub fn is_psd_matrix_expr(e: &Expr) -> bool {
    match e.kind() {
        ExprKind::Variable(v) => v.attrs().psd,
        ExprKind::Scale(s) => *s >= 0.0 && is_psd_matrix_expr(&e.children()[0]),
        ExprKind::Constant(vals) => {
            let n = e.shape().rows();
            if e.shape().cols() != n {
                return false;
            }
            let m = Matrix { rows: n, cols: n, data: vals.to_vec() };
            m.is_symmetric(1e-9) && min_eigenvalue(&m) >= QUASIDEF_EIG_FLOOR
        }
        _ => false,
    }
}

fn same_size(op: &'static str, f: &Expr, g: &Expr) -> Result<(), ExprError> {
    if f.size() != g.size() {
        return Err(ExprError::ShapeMismatch { op, left: f.shape(), right: g.shape() });
    }
    Ok(())
}

fn nonneg_attachment(g: &Expr) -> Vec<Constraint> {
    if g.sign().is_nonneg() {
        Vec::new()
    } else {
        vec![g.ge_const(0.0)]
    }
}

fn saddle(atom: SaddleAtom, f: &Expr, g: &Expr, attached: Vec<Constraint>) -> Expr {
    Expr::build_with(ExprKind::Saddle(atom), vec![f.clone(), g.clone()], Shape::Scalar, attached)
}

/// `xᵀy` for affine `x` (convex side) and affine `y` (concave side).
pub fn inner(x: &Expr, y: &Expr) -> Result<Expr, ExprError> {
    same_size("inner", x, y)?;
    Ok(saddle(SaddleAtom::Inner, x, y, Vec::new()))
}

/// `F(x)ᵀG(y)` for convex `F` and concave `G`. When `F` is not affine the
/// constraint `G >= 0` is attached unless `G` is provably nonnegative.
pub fn saddle_inner(f: &Expr, g: &Expr) -> Result<Expr, ExprError> {
    same_size("saddle_inner", f, g)?;
    let attached = if f.is_affine() { Vec::new() } else { nonneg_attachment(g) };
    Ok(saddle(SaddleAtom::SaddleInner, f, g, attached))
}

/// `sqrt(Σ yᵢ xᵢ²)`; attaches `y >= 0` unless provably nonnegative.
pub fn weighted_norm2(x: &Expr, y: &Expr) -> Result<Expr, ExprError> {
    same_size("weighted_norm2", x, y)?;
    Ok(saddle(SaddleAtom::WeightedNorm2, x, y, nonneg_attachment(y)))
}

/// `log(Σ yᵢ exp(xᵢ))`; attaches `y >= 0` unless provably nonnegative.
pub fn weighted_log_sum_exp(x: &Expr, y: &Expr) -> Result<Expr, ExprError> {
    same_size("weighted_log_sum_exp", x, y)?;
    Ok(saddle(SaddleAtom::WeightedLogSumExp, x, y, nonneg_attachment(y)))
}

/// `[x; y]ᵀ [[P, S], [Sᵀ, Q]] [x; y]` with `P ⪰ 0` and `Q ⪯ 0`.
pub fn quasidef_quad_form(x: &Expr, y: &Expr, p: &Matrix, q: &Matrix, s: &Matrix) -> Result<Expr, ExprError> {
    let (n, m) = (x.size(), y.size());
    let bad = |msg: &str| Err(ExprError::Invalid { op: "quasidef_quad_form", msg: msg.into() });
    if p.rows != n || p.cols != n {
        return bad("P must be n x n for x of size n");
    }
    if q.rows != m || q.cols != m {
        return bad("Q must be m x m for y of size m");
    }
    if s.rows != n || s.cols != m {
        return bad("S must be n x m");
    }
    if !p.is_symmetric(1e-9) || !q.is_symmetric(1e-9) {
        return bad("P and Q must be symmetric");
    }
    let pmin = min_eigenvalue(p);
    if pmin < QUASIDEF_EIG_FLOOR {
        return Err(ExprError::Indefinite { which: "P", min_eig: pmin });
    }
    let qmin = min_eigenvalue(&q.scaled(-1.0));
    if qmin < QUASIDEF_EIG_FLOOR {
        return Err(ExprError::Indefinite { which: "-Q", min_eig: qmin });
    }
    let atom = SaddleAtom::QuasidefQuadForm { p: Arc::new(p.clone()), q: Arc::new(q.clone()), s: Arc::new(s.clone()) };
    Ok(saddle(atom, x, y, Vec::new()))
}

/// `xᵀYx` for affine `x` and a PSD matrix `Y`.
pub fn saddle_quad_form(x: &Expr, y: &Expr) -> Result<Expr, ExprError> {
    let n = x.size();
    let ok = match y.shape() {
        Shape::Matrix(a, b) => a == n && b == n,
        Shape::Scalar => n == 1,
        _ => false,
    };
    if !ok || matches!(x.shape(), Shape::Matrix(..)) {
        return Err(ExprError::ShapeMismatch { op: "saddle_quad_form", left: x.shape(), right: y.shape() });
    }
    Ok(saddle(SaddleAtom::SaddleQuadForm, x, y, Vec::new()))
}
