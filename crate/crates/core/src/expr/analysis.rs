use super::{Expr, ExprKind};
use crate::atoms::Monotonicity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Curvature {
    Constant,
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    pub fn is_constant(self) -> bool {
        self == Curvature::Constant
    }

    pub fn is_affine(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine)
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine | Curvature::Convex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine | Curvature::Concave)
    }

    /// Curvature of a sum.
    pub fn add(self, other: Curvature) -> Curvature {
        use Curvature::*;
        match (self, other) {
            (Unknown, _) | (_, Unknown) => Unknown,
            (Constant, c) | (c, Constant) => c,
            (Affine, c) | (c, Affine) => c,
            (Convex, Convex) => Convex,
            (Concave, Concave) => Concave,
            _ => Unknown,
        }
    }

    pub fn negate(self) -> Curvature {
        match self {
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            c => c,
        }
    }

    pub fn scale(self, s: f64) -> Curvature {
        if s == 0.0 {
            Curvature::Constant
        } else if s > 0.0 {
            self
        } else {
            self.negate()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Zero,
    NonNegative,
    NonPositive,
    Unknown,
}

impl Sign {
    pub fn of_value(v: f64) -> Sign {
        if v == 0.0 {
            Sign::Zero
        } else if v > 0.0 {
            Sign::NonNegative
        } else if v < 0.0 {
            Sign::NonPositive
        } else {
            Sign::Unknown
        }
    }

    pub fn of_values(vals: &[f64]) -> Sign {
        vals.iter().fold(Sign::Zero, |acc, &v| acc.join(Sign::of_value(v)))
    }

    pub fn is_nonneg(self) -> bool {
        matches!(self, Sign::Zero | Sign::NonNegative)
    }

    pub fn is_nonpos(self) -> bool {
        matches!(self, Sign::Zero | Sign::NonPositive)
    }

    /// Least upper bound: a sign valid for values of either kind.
    pub fn join(self, other: Sign) -> Sign {
        use Sign::*;
        match (self, other) {
            (Zero, s) | (s, Zero) => s,
            (a, b) if a == b => a,
            _ => Unknown,
        }
    }

    /// Sign of a sum.
    pub fn add(self, other: Sign) -> Sign {
        self.join(other)
    }

    pub fn negate(self) -> Sign {
        match self {
            Sign::NonNegative => Sign::NonPositive,
            Sign::NonPositive => Sign::NonNegative,
            s => s,
        }
    }

    pub fn mul(self, other: Sign) -> Sign {
        use Sign::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (Unknown, _) | (_, Unknown) => Unknown,
            (a, b) if a == b => NonNegative,
            _ => NonPositive,
        }
    }
}

/// Analysis of a node from its already-analysed children.
pub(super) fn analyze(kind: &ExprKind, children: &[Expr]) -> (Curvature, Sign) {
    let all_const = children.iter().all(|c| c.curvature().is_constant());
    match kind {
        ExprKind::Variable(v) => {
            let a = v.attrs();
            let sign = if a.nonneg { Sign::NonNegative } else { Sign::Unknown };
            (Curvature::Affine, sign)
        }
        ExprKind::Constant(vals) => (Curvature::Constant, Sign::of_values(vals)),
        ExprKind::Add => {
            let curv = children.iter().map(Expr::curvature).fold(Curvature::Constant, Curvature::add);
            let sign = children.iter().map(Expr::sign).fold(Sign::Zero, Sign::add);
            (curv, sign)
        }
        ExprKind::Neg => (children[0].curvature().negate(), children[0].sign().negate()),
        ExprKind::Scale(s) => (children[0].curvature().scale(*s), children[0].sign().mul(Sign::of_value(*s))),
        ExprKind::LeftMul(m) | ExprKind::RightMul(m) => {
            let c = children[0].curvature();
            let curv = if c.is_affine() { c } else { signed_linear(c, &m.data) };
            let sign = product_sign(&m.data, children[0].sign());
            (curv, sign)
        }
        ExprKind::MulElem(vals) => {
            let c = children[0].curvature();
            let curv = if c.is_affine() { c } else { signed_linear(c, vals) };
            (curv, product_sign(vals, children[0].sign()))
        }
        ExprKind::Index(_) | ExprKind::Reshape | ExprKind::Sum | ExprKind::Transpose => {
            (children[0].curvature(), children[0].sign())
        }
        ExprKind::Concat { .. } => {
            let curv = children.iter().map(Expr::curvature).fold(Curvature::Constant, |a, b| {
                // stacking is not a sum, but the join rules coincide
                a.add(b)
            });
            let sign = children.iter().map(Expr::sign).fold(Sign::Zero, Sign::join);
            (curv, sign)
        }
        ExprKind::Product => {
            let sign = children[0].sign().mul(children[1].sign());
            if all_const {
                (Curvature::Constant, sign)
            } else {
                (Curvature::Unknown, sign)
            }
        }
        ExprKind::Dcp(atom) => {
            let signs: alloc::vec::Vec<Sign> = children.iter().map(Expr::sign).collect();
            let sign = atom.sign(&signs);
            if all_const {
                return (Curvature::Constant, sign);
            }
            let base = atom.curvature();
            let mut ok = true;
            for (i, c) in children.iter().enumerate() {
                let cc = c.curvature();
                if cc.is_affine() {
                    continue;
                }
                let mono = atom.monotonicity(i, c.sign());
                let fits = match (base, mono) {
                    (Curvature::Convex, Monotonicity::Increasing) => cc.is_convex(),
                    (Curvature::Convex, Monotonicity::Decreasing) => cc.is_concave(),
                    (Curvature::Concave, Monotonicity::Increasing) => cc.is_concave(),
                    (Curvature::Concave, Monotonicity::Decreasing) => cc.is_convex(),
                    _ => false,
                };
                ok &= fits;
            }
            (if ok { base } else { Curvature::Unknown }, sign)
        }
        ExprKind::Saddle(atom) => atom.fixed_side_analysis(children),
        ExprKind::Extremum(se) => {
            let curv = if se.direction.is_max() { Curvature::Convex } else { Curvature::Concave };
            (curv, Sign::Unknown)
        }
    }
}

/// Curvature of a linear map with coefficients `coefs` applied to an
/// expression of non-affine curvature `c`. Only sign-uniform maps preserve it.
fn signed_linear(c: Curvature, coefs: &[f64]) -> Curvature {
    match Sign::of_values(coefs) {
        Sign::Zero => Curvature::Constant,
        Sign::NonNegative => c,
        Sign::NonPositive => c.negate(),
        Sign::Unknown => Curvature::Unknown,
    }
}

fn product_sign(coefs: &[f64], s: Sign) -> Sign {
    Sign::of_values(coefs).mul(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_lattice() {
        use Curvature::*;
        assert_eq!(Convex.add(Affine), Convex);
        assert_eq!(Convex.add(Concave), Unknown);
        assert_eq!(Constant.add(Constant), Constant);
        assert_eq!(Convex.scale(-2.0), Concave);
        assert!(Constant.is_convex() && Constant.is_concave());
        assert!(Affine.is_convex() && Affine.is_concave());
    }

    #[test]
    fn sign_rules() {
        use Sign::*;
        assert!(Zero.is_nonneg() && Zero.is_nonpos());
        assert_eq!(NonNegative.add(NonNegative), NonNegative);
        assert_eq!(NonNegative.add(NonPositive), Unknown);
        assert_eq!(NonPositive.mul(NonPositive), NonNegative);
        assert_eq!(Sign::of_values(&[0.0, 2.0]), NonNegative);
        assert_eq!(Sign::of_value(f64::NAN), Unknown);
    }
}
