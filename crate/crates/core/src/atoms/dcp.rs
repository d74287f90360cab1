//! The DCP atom subset.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{Curvature, Expr, ExprError, ExprKind, Shape, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DcpAtom {
    Square,
    Abs,
    Norm1,
    Norm2,
    NormInf,
    SumSquares,
    /// `max(x, 0)`
    Pos,
    Exp,
    LogSumExp,
    /// Elementwise maximum of its arguments.
    Maximum,
    Log,
    /// Elementwise minimum of its arguments.
    Minimum,
    Sqrt,
    /// Unweighted geometric mean of the entries.
    GeoMean,
}

impl DcpAtom {
    pub const ALL: [DcpAtom; 14] = [
        DcpAtom::Square,
        DcpAtom::Abs,
        DcpAtom::Norm1,
        DcpAtom::Norm2,
        DcpAtom::NormInf,
        DcpAtom::SumSquares,
        DcpAtom::Pos,
        DcpAtom::Exp,
        DcpAtom::LogSumExp,
        DcpAtom::Maximum,
        DcpAtom::Log,
        DcpAtom::Minimum,
        DcpAtom::Sqrt,
        DcpAtom::GeoMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DcpAtom::Square => "square",
            DcpAtom::Abs => "abs",
            DcpAtom::Norm1 => "norm1",
            DcpAtom::Norm2 => "norm2",
            DcpAtom::NormInf => "norm_inf",
            DcpAtom::SumSquares => "sum_squares",
            DcpAtom::Pos => "pos",
            DcpAtom::Exp => "exp",
            DcpAtom::LogSumExp => "log_sum_exp",
            DcpAtom::Maximum => "maximum",
            DcpAtom::Log => "log",
            DcpAtom::Minimum => "minimum",
            DcpAtom::Sqrt => "sqrt",
            DcpAtom::GeoMean => "geo_mean",
        }
    }

    pub fn from_name(name: &str) -> Option<DcpAtom> {
        DcpAtom::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn curvature(self) -> Curvature {
        match self {
            DcpAtom::Log | DcpAtom::Minimum | DcpAtom::Sqrt | DcpAtom::GeoMean => Curvature::Concave,
            _ => Curvature::Convex,
        }
    }

    pub fn is_elementwise(self) -> bool {
        matches!(
            self,
            DcpAtom::Square
                | DcpAtom::Abs
                | DcpAtom::Pos
                | DcpAtom::Exp
                | DcpAtom::Log
                | DcpAtom::Sqrt
                | DcpAtom::Maximum
                | DcpAtom::Minimum
        )
    }

    /// Monotonicity in argument `_i`, given that argument's sign.
    pub fn monotonicity(self, _i: usize, arg_sign: Sign) -> Monotonicity {
        match self {
            DcpAtom::Square | DcpAtom::Abs | DcpAtom::Norm1 | DcpAtom::Norm2 | DcpAtom::NormInf | DcpAtom::SumSquares => {
                if arg_sign.is_nonneg() {
                    Monotonicity::Increasing
                } else if arg_sign.is_nonpos() {
                    Monotonicity::Decreasing
                } else {
                    Monotonicity::None
                }
            }
            _ => Monotonicity::Increasing,
        }
    }

    pub fn sign(self, args: &[Sign]) -> Sign {
        match self {
            DcpAtom::Square
            | DcpAtom::Abs
            | DcpAtom::Norm1
            | DcpAtom::Norm2
            | DcpAtom::NormInf
            | DcpAtom::SumSquares
            | DcpAtom::Pos
            | DcpAtom::Exp
            | DcpAtom::Sqrt
            | DcpAtom::GeoMean => Sign::NonNegative,
            DcpAtom::LogSumExp | DcpAtom::Log => Sign::Unknown,
            DcpAtom::Maximum => {
                if args.iter().any(|s| s.is_nonneg()) {
                    Sign::NonNegative
                } else if args.iter().all(|s| s.is_nonpos()) {
                    Sign::NonPositive
                } else {
                    Sign::Unknown
                }
            }
            DcpAtom::Minimum => {
                if args.iter().any(|s| s.is_nonpos()) {
                    Sign::NonPositive
                } else if args.iter().all(|s| s.is_nonneg()) {
                    Sign::NonNegative
                } else {
                    Sign::Unknown
                }
            }
        }
    }

    /// Numeric value; `out_size` is the size of the result.
    pub fn eval(self, args: &[Vec<f64>], out_size: usize) -> Vec<f64> {
        let a = &args[0];
        let map = |f: fn(f64) -> f64| a.iter().map(|&v| f(v)).collect::<Vec<f64>>();
        match self {
            DcpAtom::Square => map(|v| v * v),
            DcpAtom::Abs => map(f64::abs),
            DcpAtom::Pos => map(|v| v.max(0.0)),
            DcpAtom::Exp => map(libm::exp),
            DcpAtom::Log => map(libm::log),
            DcpAtom::Sqrt => map(libm::sqrt),
            DcpAtom::Norm1 => vec![a.iter().map(|v| v.abs()).sum()],
            DcpAtom::Norm2 => vec![libm::sqrt(a.iter().map(|v| v * v).sum())],
            DcpAtom::NormInf => vec![a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))],
            DcpAtom::SumSquares => vec![a.iter().map(|v| v * v).sum()],
            DcpAtom::LogSumExp => {
                let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return vec![m];
                }
                vec![m + libm::log(a.iter().map(|v| libm::exp(v - m)).sum())]
            }
            DcpAtom::GeoMean => {
                let n = a.len() as f64;
                if a.iter().any(|&v| v < 0.0) {
                    return vec![f64::NAN];
                }
                vec![libm::exp(a.iter().map(|&v| libm::log(v)).sum::<f64>() / n)]
            }
            DcpAtom::Maximum | DcpAtom::Minimum => (0..out_size)
                .map(|i| {
                    let it = args.iter().map(|arg| if arg.len() == 1 { arg[0] } else { arg[i] });
                    if self == DcpAtom::Maximum {
                        it.fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        it.fold(f64::INFINITY, f64::min)
                    }
                })
                .collect(),
        }
    }
}

fn unary(atom: DcpAtom, e: &Expr) -> Expr {
    let shape = if atom.is_elementwise() { e.shape() } else { Shape::Scalar };
    Expr::build(ExprKind::Dcp(atom), vec![e.clone()], shape)
}

pub fn square(e: &Expr) -> Expr {
    unary(DcpAtom::Square, e)
}

pub fn abs(e: &Expr) -> Expr {
    unary(DcpAtom::Abs, e)
}

pub fn norm1(e: &Expr) -> Expr {
    unary(DcpAtom::Norm1, e)
}

pub fn norm2(e: &Expr) -> Expr {
    unary(DcpAtom::Norm2, e)
}

pub fn norm_inf(e: &Expr) -> Expr {
    unary(DcpAtom::NormInf, e)
}

pub fn sum_squares(e: &Expr) -> Expr {
    unary(DcpAtom::SumSquares, e)
}

pub fn pos(e: &Expr) -> Expr {
    unary(DcpAtom::Pos, e)
}

pub fn exp(e: &Expr) -> Expr {
    unary(DcpAtom::Exp, e)
}

pub fn log_sum_exp(e: &Expr) -> Expr {
    unary(DcpAtom::LogSumExp, e)
}

pub fn log(e: &Expr) -> Expr {
    unary(DcpAtom::Log, e)
}

pub fn sqrt(e: &Expr) -> Expr {
    unary(DcpAtom::Sqrt, e)
}

pub fn geo_mean(e: &Expr) -> Expr {
    unary(DcpAtom::GeoMean, e)
}

fn extremal(atom: DcpAtom, args: &[Expr]) -> Result<Expr, ExprError> {
    if args.len() < 2 {
        return Err(ExprError::Invalid { op: atom.name(), msg: "needs at least two arguments".into() });
    }
    let mut shape = Shape::Scalar;
    for a in args {
        let s = a.shape();
        if s.is_scalar() {
            continue;
        }
        if !shape.is_scalar() && shape != s {
            return Err(ExprError::ShapeMismatch { op: atom.name(), left: shape, right: s });
        }
        shape = s;
    }
    Ok(Expr::build(ExprKind::Dcp(atom), args.to_vec(), shape))
}

pub fn maximum(args: &[Expr]) -> Result<Expr, ExprError> {
    extremal(DcpAtom::Maximum, args)
}

pub fn minimum(args: &[Expr]) -> Result<Expr, ExprError> {
    extremal(DcpAtom::Minimum, args)
}

/// Apply a DCP atom by name (used by file front ends).
pub fn apply_dcp(atom: DcpAtom, args: &[Expr]) -> Result<Expr, ExprError> {
    match atom {
        DcpAtom::Maximum => maximum(args),
        DcpAtom::Minimum => minimum(args),
        _ => {
            if args.len() != 1 {
                return Err(ExprError::Invalid { op: atom.name(), msg: "takes exactly one argument".into() });
            }
            Ok(unary(atom, &args[0]))
        }
    }
}
