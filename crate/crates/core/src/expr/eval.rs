use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{Expr, ExprKind, Shape, VariableDecl};

/// Source of variable values for numeric evaluation.
pub trait Valuation {
    fn value_of(&self, v: &VariableDecl) -> Option<&[f64]>;
}

impl Valuation for BTreeMap<u64, Vec<f64>> {
    fn value_of(&self, v: &VariableDecl) -> Option<&[f64]> {
        self.get(&v.id()).map(Vec::as_slice)
    }
}

impl<V: Valuation + ?Sized> Valuation for &V {
    fn value_of(&self, v: &VariableDecl) -> Option<&[f64]> {
        (**self).value_of(v)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable `{0}` has no value")]
    MissingValue(String),
    #[error("variable `{name}` has {got} values, expected {expected}")]
    WrongSize { name: String, got: usize, expected: usize },
    #[error("saddle extremum `{0}` needs a cone solve to evaluate")]
    NeedsSolver(String),
}

impl Expr {
    /// Numeric value (column-major flat) under `vals`.
    pub fn eval(&self, vals: &dyn Valuation) -> Result<Vec<f64>, EvalError> {
        let node = &self.0;
        let args = || -> Result<Vec<Vec<f64>>, EvalError> {
            node.children.iter().map(|c| c.eval(vals)).collect()
        };
        Ok(match &node.kind {
            ExprKind::Variable(v) => {
                let val = vals.value_of(v).ok_or_else(|| EvalError::MissingValue(v.name().to_string()))?;
                if val.len() != v.size() {
                    return Err(EvalError::WrongSize {
                        name: v.name().to_string(),
                        got: val.len(),
                        expected: v.size(),
                    });
                }
                val.to_vec()
            }
            ExprKind::Constant(c) => c.to_vec(),
            ExprKind::Add => {
                let n = self.size();
                let mut out = vec![0.0; n];
                for a in args()? {
                    if a.len() == 1 {
                        out.iter_mut().for_each(|o| *o += a[0]);
                    } else {
                        out.iter_mut().zip(&a).for_each(|(o, v)| *o += v);
                    }
                }
                out
            }
            ExprKind::Neg => node.children[0].eval(vals)?.into_iter().map(|v| -v).collect(),
            ExprKind::Scale(s) => node.children[0].eval(vals)?.into_iter().map(|v| s * v).collect(),
            ExprKind::LeftMul(m) => {
                let a = node.children[0].eval(vals)?;
                m.mul_flat(&a, node.children[0].shape().cols())
            }
            ExprKind::RightMul(m) => {
                let c = &node.children[0];
                let (r, k) = (c.shape().rows(), c.shape().cols());
                let a = c.eval(vals)?;
                let mut out = vec![0.0; r * m.cols];
                for j in 0..m.cols {
                    for l in 0..k {
                        let w = m.get(l, j);
                        for i in 0..r {
                            out[i + j * r] += a[i + l * r] * w;
                        }
                    }
                }
                out
            }
            ExprKind::MulElem(c) => {
                node.children[0].eval(vals)?.into_iter().zip(c.iter()).map(|(a, b)| a * b).collect()
            }
            ExprKind::Sum => vec![node.children[0].eval(vals)?.iter().sum()],
            ExprKind::Index(_) | ExprKind::Reshape | ExprKind::Transpose | ExprKind::Concat { .. } => {
                let a = args()?;
                self.gather_map().into_iter().map(|(c, i)| a[c][i]).collect()
            }
            ExprKind::Product => {
                let a = args()?;
                let (l, r) = (&node.children[0], &node.children[1]);
                product(&a[0], l.shape(), &a[1], r.shape())
            }
            ExprKind::Dcp(atom) => {
                let a = args()?;
                atom.eval(&a, self.size())
            }
            ExprKind::Saddle(atom) => {
                let a = args()?;
                vec![atom.eval(&a[0], &a[1], node.children[0].shape())]
            }
            ExprKind::Extremum(se) => return Err(EvalError::NeedsSolver(se.direction.name().to_string())),
        })
    }

    /// Scalar value; convenience for scalar expressions.
    pub fn eval_scalar(&self, vals: &dyn Valuation) -> Result<f64, EvalError> {
        let v = self.eval(vals)?;
        Ok(v[0])
    }
}

fn product(a: &[f64], sa: Shape, b: &[f64], sb: Shape) -> Vec<f64> {
    if sa.is_scalar() {
        return b.iter().map(|v| v * a[0]).collect();
    }
    if sb.is_scalar() {
        return a.iter().map(|v| v * b[0]).collect();
    }
    match (sa, sb) {
        (Shape::Vector(_), Shape::Vector(_)) => vec![a.iter().zip(b).map(|(x, y)| x * y).sum()],
        (Shape::Vector(k), Shape::Matrix(_, n)) => {
            (0..n).map(|j| (0..k).map(|i| a[i] * b[i + j * k]).sum()).collect()
        }
        _ => {
            let (m, k) = (sa.rows(), sa.cols());
            let n = sb.cols();
            let mut out = vec![0.0; m * n];
            for j in 0..n {
                for l in 0..k {
                    for i in 0..m {
                        out[i + j * m] += a[i + l * m] * b[l + j * k];
                    }
                }
            }
            out
        }
    }
}
