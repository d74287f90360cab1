//! Immutable expression trees with DCP curvature and sign analysis.
//!
//! Values are flattened column-major. Broadcasting is limited to scalars:
//! a scalar operand of `+` or of a constraint is broadcast to the other
//! operand's shape, everything else must match exactly.

mod analysis;
mod eval;
mod matrix;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

pub use analysis::{Curvature, Sign};
pub use eval::{EvalError, Valuation};
pub use matrix::{svec, svec_entries, Matrix};

use crate::atoms::{DcpAtom, SaddleAtom};
use crate::problem::Extremum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    /// Build a shape from a dimension list (0, 1 or 2 entries, each >= 1).
    pub fn from_dims(dims: &[usize]) -> Result<Shape, ExprError> {
        match *dims {
            [] => Ok(Shape::Scalar),
            [n] if n >= 1 => Ok(Shape::Vector(n)),
            [m, n] if m >= 1 && n >= 1 => Ok(Shape::Matrix(m, n)),
            _ => Err(ExprError::BadShape(dims.to_vec())),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Scalar => vec![],
            Shape::Vector(n) => vec![n],
            Shape::Matrix(m, n) => vec![m, n],
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(m, n) => m * n,
        }
    }

    /// Rows when viewed as a matrix (vectors are columns).
    pub fn rows(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(m, _) => m,
        }
    }

    pub fn cols(&self) -> usize {
        match *self {
            Shape::Matrix(_, n) => n,
            _ => 1,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Shape::Scalar)
    }

    pub fn is_square(&self) -> bool {
        matches!(self, Shape::Matrix(m, n) if m == n)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Scalar => write!(f, "()"),
            Shape::Vector(n) => write!(f, "({n},)"),
            Shape::Matrix(m, n) => write!(f, "({m}, {n})"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct VarAttrs {
    pub nonneg: bool,
    pub psd: bool,
    pub symmetric: bool,
    /// Dummy variable of a saddle extremum scope.
    pub local: bool,
}

impl VarAttrs {
    pub const NONE: VarAttrs = VarAttrs { nonneg: false, psd: false, symmetric: false, local: false };

    pub fn nonneg() -> Self {
        VarAttrs { nonneg: true, ..Self::NONE }
    }

    pub fn local() -> Self {
        VarAttrs { local: true, ..Self::NONE }
    }
}

static NEXT_VAR_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
struct VarInner {
    id: u64,
    shape: Shape,
    attrs: VarAttrs,
    name: String,
}

/// A decision variable. Cloning shares identity; equality and ordering are by
/// the process-unique id.
#[derive(Clone)]
pub struct VariableDecl(Arc<VarInner>);

impl VariableDecl {
    pub fn new(name: &str, shape: Shape, attrs: VarAttrs) -> Result<Self, ExprError> {
        if (attrs.psd || attrs.symmetric) && !shape.is_square() {
            return Err(ExprError::NotSquare { name: name.to_string(), shape });
        }
        let id = NEXT_VAR_ID.fetch_add(1, Ordering::Relaxed);
        Ok(VariableDecl(Arc::new(VarInner { id, shape, attrs, name: name.to_string() })))
    }

    pub fn scalar(name: &str) -> Self {
        Self::new(name, Shape::Scalar, VarAttrs::NONE).expect("scalar variable")
    }

    pub fn vector(name: &str, n: usize) -> Self {
        Self::new(name, Shape::Vector(n), VarAttrs::NONE).expect("vector variable")
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub fn size(&self) -> usize {
        self.0.shape.size()
    }

    pub fn attrs(&self) -> VarAttrs {
        self.0.attrs
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn is_local(&self) -> bool {
        self.0.attrs.local
    }

    pub fn expr(&self) -> Expr {
        Expr::var(self)
    }
}

impl PartialEq for VariableDecl {
    fn eq(&self, other: &Self) -> bool {
        self.id() == other.id()
    }
}
impl Eq for VariableDecl {}
impl PartialOrd for VariableDecl {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for VariableDecl {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.id().cmp(&other.id())
    }
}

impl fmt::Debug for VariableDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}{}", self.name(), self.id(), self.shape())
    }
}

impl fmt::Display for VariableDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("invalid shape {0:?}")]
    BadShape(Vec<usize>),
    #[error("variable `{name}` with shape {shape} cannot be symmetric/psd")]
    NotSquare { name: String, shape: Shape },
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch { op: &'static str, left: Shape, right: Shape },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("index {index} out of bounds for size {size}")]
    IndexOutOfBounds { index: usize, size: usize },
    #[error("matrix is not quasi-semidefinite: minimum eigenvalue of {which} is {min_eig:.3e}")]
    Indefinite { which: &'static str, min_eig: f64 },
}

/// Kind of an expression node.
#[derive(Clone, Debug)]
pub enum ExprKind {
    Variable(VariableDecl),
    Constant(Arc<Vec<f64>>),
    /// Sum of children (scalar children broadcast).
    Add,
    Neg,
    Scale(f64),
    /// `C @ child`.
    LeftMul(Arc<Matrix>),
    /// `child @ C` for a matrix child.
    RightMul(Arc<Matrix>),
    /// Elementwise product with a constant array of the child's shape.
    MulElem(Arc<Vec<f64>>),
    /// Gather of flat entries of the child.
    Index(Arc<Vec<usize>>),
    Reshape,
    Sum,
    Transpose,
    /// `hstack` (axis 1) or `vstack` (axis 0).
    Concat { axis: u8 },
    /// Product of two non-constant expressions. Never DCP.
    Product,
    Dcp(DcpAtom),
    Saddle(SaddleAtom),
    Extremum(Arc<Extremum>),
}

#[derive(Debug)]
pub(crate) struct Node {
    pub kind: ExprKind,
    pub children: Vec<Expr>,
    pub shape: Shape,
    pub curvature: Curvature,
    pub sign: Sign,
    pub has_saddle: bool,
    /// Constraints attached by a saddle atom (e.g. `y >= 0`).
    pub attached: Vec<Constraint>,
}

/// Shared handle to an immutable expression node.
#[derive(Clone)]
pub struct Expr(pub(crate) Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Expr {
    pub(crate) fn build(kind: ExprKind, children: Vec<Expr>, shape: Shape) -> Expr {
        Self::build_with(kind, children, shape, Vec::new())
    }

    pub(crate) fn build_with(
        kind: ExprKind,
        children: Vec<Expr>,
        shape: Shape,
        attached: Vec<Constraint>,
    ) -> Expr {
        let (curvature, sign) = analysis::analyze(&kind, &children);
        let has_saddle = matches!(kind, ExprKind::Saddle(_)) || children.iter().any(|c| c.0.has_saddle);
        Expr(Arc::new(Node { kind, children, shape, curvature, sign, has_saddle, attached }))
    }

    pub fn var(v: &VariableDecl) -> Expr {
        Expr::build(ExprKind::Variable(v.clone()), Vec::new(), v.shape())
    }

    pub fn constant(c: f64) -> Expr {
        Expr::build(ExprKind::Constant(Arc::new(vec![c])), Vec::new(), Shape::Scalar)
    }

    pub fn vector(values: &[f64]) -> Expr {
        Expr::build(ExprKind::Constant(Arc::new(values.to_vec())), Vec::new(), Shape::Vector(values.len()))
    }

    pub fn matrix(m: &Matrix) -> Expr {
        Expr::build(ExprKind::Constant(Arc::new(m.data.clone())), Vec::new(), Shape::Matrix(m.rows, m.cols))
    }

    pub fn constant_shaped(values: Vec<f64>, shape: Shape) -> Result<Expr, ExprError> {
        if values.len() != shape.size() {
            return Err(ExprError::Invalid { op: "constant", msg: "value count does not match shape".into() });
        }
        Ok(Expr::build(ExprKind::Constant(Arc::new(values)), Vec::new(), shape))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn children(&self) -> &[Expr] {
        &self.0.children
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub fn size(&self) -> usize {
        self.0.shape.size()
    }

    pub fn curvature(&self) -> Curvature {
        self.0.curvature
    }

    pub fn sign(&self) -> Sign {
        self.0.sign
    }

    /// True if a saddle atom occurs anywhere in the tree (saddle extremum
    /// bodies excluded; those are scoped).
    pub fn has_saddle_atom(&self) -> bool {
        self.0.has_saddle
    }

    pub fn attached_constraints(&self) -> &[Constraint] {
        &self.0.attached
    }

    pub fn is_constant(&self) -> bool {
        self.0.curvature == Curvature::Constant
    }

    pub fn is_affine(&self) -> bool {
        self.0.curvature.is_affine()
    }

    pub fn is_convex(&self) -> bool {
        self.0.curvature.is_convex()
    }

    pub fn is_concave(&self) -> bool {
        self.0.curvature.is_concave()
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Value of a constant expression.
    pub fn constant_value(&self) -> Option<Vec<f64>> {
        if !self.is_constant() {
            return None;
        }
        self.eval(&BTreeMap::<u64, Vec<f64>>::new()).ok()
    }

    pub fn as_variable(&self) -> Option<&VariableDecl> {
        match &self.0.kind {
            ExprKind::Variable(v) => Some(v),
            _ => None,
        }
    }

    // ---------------------------------------------------------------- affine ops

    pub fn try_add(&self, other: &Expr) -> Result<Expr, ExprError> {
        let shape = broadcast("add", self.shape(), other.shape())?;
        Ok(Expr::build(ExprKind::Add, vec![self.clone(), other.clone()], shape))
    }

    pub fn sum_of(terms: &[Expr]) -> Result<Expr, ExprError> {
        match terms {
            [] => Ok(Expr::constant(0.0)),
            [one] => Ok(one.clone()),
            _ => {
                let mut shape = terms[0].shape();
                for t in &terms[1..] {
                    shape = broadcast("add", shape, t.shape())?;
                }
                Ok(Expr::build(ExprKind::Add, terms.to_vec(), shape))
            }
        }
    }

    pub fn try_sub(&self, other: &Expr) -> Result<Expr, ExprError> {
        self.try_add(&other.negate())
    }

    pub fn negate(&self) -> Expr {
        Expr::build(ExprKind::Neg, vec![self.clone()], self.shape())
    }

    pub fn scale(&self, s: f64) -> Expr {
        Expr::build(ExprKind::Scale(s), vec![self.clone()], self.shape())
    }

    /// Matrix product. A constant operand gives an affine map; two
    /// non-constant operands give a (non-DCP) product node.
    pub fn matmul(&self, other: &Expr) -> Result<Expr, ExprError> {
        let (ls, rs) = (self.shape(), other.shape());
        if self.is_constant() && ls.is_scalar() {
            return Ok(other.scale(self.constant_value().unwrap()[0]));
        }
        if other.is_constant() && rs.is_scalar() {
            return Ok(self.scale(other.constant_value().unwrap()[0]));
        }
        if self.is_constant() && !matches!(ls, Shape::Vector(_)) {
            let m = Matrix::from_expr_value(ls, self.constant_value().unwrap());
            return left_mul(Arc::new(m), other);
        }
        if other.is_constant() {
            let v = other.constant_value().unwrap();
            return match (ls, rs) {
                (Shape::Vector(k), Shape::Vector(k2)) if k == k2 => Ok(self.multiply(&v)?.sum()),
                (Shape::Vector(k), Shape::Matrix(k2, _)) if k == k2 => {
                    let m = Matrix::from_expr_value(rs, v).transpose();
                    left_mul(Arc::new(m), self)
                }
                (Shape::Matrix(_, k), Shape::Matrix(k2, n)) if k == k2 => {
                    let m = Matrix::from_expr_value(rs, v);
                    let shape = Shape::Matrix(ls.rows(), n);
                    Ok(Expr::build(ExprKind::RightMul(Arc::new(m)), vec![self.clone()], shape))
                }
                (Shape::Matrix(m, k), Shape::Vector(k2)) if k == k2 => {
                    let _ = m;
                    let mat = Matrix::from_expr_value(Shape::Matrix(k2, 1), v);
                    let prod = Expr::build(ExprKind::RightMul(Arc::new(mat)), vec![self.clone()], Shape::Matrix(ls.rows(), 1));
                    prod.reshape(Shape::Vector(ls.rows()))
                }
                _ => Err(ExprError::ShapeMismatch { op: "matmul", left: ls, right: rs }),
            };
        }
        if self.is_constant() {
            // constant vector on the left: v @ X
            let v = self.constant_value().unwrap();
            return match rs {
                Shape::Vector(k) if k == v.len() => Ok(other.multiply(&v)?.sum()),
                Shape::Matrix(k, _) if k == v.len() => {
                    let m = Matrix { rows: 1, cols: k, data: v };
                    let prod = left_mul(Arc::new(m), other)?;
                    prod.reshape(Shape::Vector(rs.cols()))
                }
                _ => Err(ExprError::ShapeMismatch { op: "matmul", left: ls, right: rs }),
            };
        }
        let shape = match (ls, rs) {
            (Shape::Vector(a), Shape::Vector(b)) if a == b => Shape::Scalar,
            (Shape::Matrix(_, k), Shape::Vector(b)) if k == b => Shape::Vector(ls.rows()),
            (Shape::Vector(a), Shape::Matrix(k, n)) if a == k => Shape::Vector(n),
            (Shape::Matrix(m, k), Shape::Matrix(k2, n)) if k == k2 => Shape::Matrix(m, n),
            (Shape::Scalar, s) | (s, Shape::Scalar) => s,
            _ => return Err(ExprError::ShapeMismatch { op: "matmul", left: ls, right: rs }),
        };
        Ok(Expr::build(ExprKind::Product, vec![self.clone(), other.clone()], shape))
    }

    /// Elementwise product with constant values (same size, or a single
    /// value which acts as a scale). A scalar expression is spread over all
    /// the values.
    pub fn multiply(&self, values: &[f64]) -> Result<Expr, ExprError> {
        if values.len() == 1 {
            return Ok(self.scale(values[0]));
        }
        if self.shape().is_scalar() {
            // scalar times a constant vector
            let spread = self.gather(vec![0; values.len()], Shape::Vector(values.len()))?;
            return spread.multiply(values);
        }
        if values.len() != self.size() {
            return Err(ExprError::Invalid {
                op: "multiply",
                msg: alloc::format!("{} constants for expression of size {}", values.len(), self.size()),
            });
        }
        Ok(Expr::build(ExprKind::MulElem(Arc::new(values.to_vec())), vec![self.clone()], self.shape()))
    }

    pub fn sum(&self) -> Expr {
        Expr::build(ExprKind::Sum, vec![self.clone()], Shape::Scalar)
    }

    /// Gather flat (column-major) entries into a new expression of `shape`.
    pub fn gather(&self, indices: Vec<usize>, shape: Shape) -> Result<Expr, ExprError> {
        if indices.len() != shape.size() {
            return Err(ExprError::Invalid { op: "index", msg: "index count does not match shape".into() });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.size()) {
            return Err(ExprError::IndexOutOfBounds { index: bad, size: self.size() });
        }
        Ok(Expr::build(ExprKind::Index(Arc::new(indices)), vec![self.clone()], shape))
    }

    /// Single entry as a scalar.
    pub fn at(&self, i: usize) -> Result<Expr, ExprError> {
        self.gather(vec![i], Shape::Scalar)
    }

    /// Entry `(i, j)` of a matrix expression.
    pub fn at2(&self, i: usize, j: usize) -> Result<Expr, ExprError> {
        let rows = self.shape().rows();
        if i >= rows || j >= self.shape().cols() {
            return Err(ExprError::IndexOutOfBounds { index: i + j * rows, size: self.size() });
        }
        self.gather(vec![i + j * rows], Shape::Scalar)
    }

    /// Entries `start..end` of a vector.
    pub fn slice(&self, start: usize, end: usize) -> Result<Expr, ExprError> {
        if start >= end {
            return Err(ExprError::Invalid { op: "slice", msg: "empty slice".into() });
        }
        self.gather((start..end).collect(), Shape::Vector(end - start))
    }

    pub fn reshape(&self, shape: Shape) -> Result<Expr, ExprError> {
        if shape.size() != self.size() {
            return Err(ExprError::ShapeMismatch { op: "reshape", left: self.shape(), right: shape });
        }
        Ok(Expr::build(ExprKind::Reshape, vec![self.clone()], shape))
    }

    pub fn transpose(&self) -> Expr {
        let shape = match self.shape() {
            Shape::Matrix(m, n) => Shape::Matrix(n, m),
            s => s,
        };
        Expr::build(ExprKind::Transpose, vec![self.clone()], shape)
    }

    /// Horizontal concatenation: scalars and vectors are joined into a vector;
    /// matrices with equal row counts are joined column-wise.
    pub fn hstack(items: &[Expr]) -> Result<Expr, ExprError> {
        concat(items, 1)
    }

    /// Vertical concatenation: matrices with equal column counts are stacked
    /// row-wise; vectors are treated as rows.
    pub fn vstack(items: &[Expr]) -> Result<Expr, ExprError> {
        concat(items, 0)
    }

    pub fn le(&self, rhs: &Expr) -> Constraint {
        Constraint::new(Relation::Le, self.clone(), rhs.clone())
    }

    pub fn ge(&self, rhs: &Expr) -> Constraint {
        Constraint::new(Relation::Le, rhs.clone(), self.clone())
    }

    pub fn equals(&self, rhs: &Expr) -> Constraint {
        Constraint::new(Relation::Eq, self.clone(), rhs.clone())
    }

    pub fn le_const(&self, c: f64) -> Constraint {
        self.le(&Expr::constant(c))
    }

    pub fn ge_const(&self, c: f64) -> Constraint {
        self.ge(&Expr::constant(c))
    }

    pub fn eq_const(&self, c: f64) -> Constraint {
        self.equals(&Expr::constant(c))
    }

    // ---------------------------------------------------------------- traversal

    /// Id-sorted, deduplicated variables of the tree. Dummy variables bound
    /// inside saddle extremum nodes are not free and are not reported.
    pub fn variables(&self) -> Vec<VariableDecl> {
        let mut out = BTreeMap::new();
        self.collect_vars(&mut out);
        out.into_values().collect()
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeMap<u64, VariableDecl>) {
        match &self.0.kind {
            ExprKind::Variable(v) => {
                out.insert(v.id(), v.clone());
            }
            ExprKind::Extremum(se) => {
                for v in se.outer_variables() {
                    out.insert(v.id(), v);
                }
            }
            _ => {
                for c in &self.0.children {
                    c.collect_vars(out);
                }
            }
        }
        for con in &self.0.attached {
            con.lhs.collect_vars(out);
            con.rhs.collect_vars(out);
        }
    }

    /// Replace the variables with ids in `values` by constants of the same
    /// shape. Saddle extremum bodies are substituted too; their locals are
    /// never replaced.
    pub fn substitute(&self, values: &BTreeMap<u64, Vec<f64>>) -> Expr {
        match &self.0.kind {
            ExprKind::Variable(v) => match values.get(&v.id()) {
                Some(x) => Expr::build(ExprKind::Constant(Arc::new(x.clone())), Vec::new(), self.shape()),
                None => self.clone(),
            },
            ExprKind::Constant(_) => self.clone(),
            ExprKind::Extremum(se) => {
                let mut inner = values.clone();
                for l in &se.locals {
                    inner.remove(&l.id());
                }
                let se2 = Extremum {
                    direction: se.direction,
                    body: se.body.substitute(&inner),
                    locals: se.locals.clone(),
                    constraints: se.constraints.iter().map(|c| c.substitute(&inner)).collect(),
                };
                Expr::build(ExprKind::Extremum(Arc::new(se2)), Vec::new(), self.shape())
            }
            kind => {
                let children = self.0.children.iter().map(|c| c.substitute(values)).collect();
                let attached = self.0.attached.iter().map(|c| c.substitute(values)).collect();
                Expr::build_with(kind.clone(), children, self.shape(), attached)
            }
        }
    }

    /// Visit every node (pre-order) with its child-index path.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr, &[usize])) {
        let mut path = Vec::new();
        self.walk_inner(f, &mut path);
    }

    fn walk_inner(&self, f: &mut dyn FnMut(&Expr, &[usize]), path: &mut Vec<usize>) {
        f(self, path);
        for (i, c) in self.0.children.iter().enumerate() {
            path.push(i);
            c.walk_inner(f, path);
            path.pop();
        }
    }

    /// All saddle extremum nodes in the tree (not descending into their bodies).
    pub fn extremum_nodes(&self) -> Vec<Arc<Extremum>> {
        let mut out = Vec::new();
        self.walk(&mut |e, _| {
            if let ExprKind::Extremum(se) = e.kind() {
                out.push(se.clone());
            }
        });
        out
    }

    /// Flat entry mapping for gather-like nodes: output entry `k` comes from
    /// child `out[k].0`, flat entry `out[k].1`.
    pub(crate) fn gather_map(&self) -> Vec<(usize, usize)> {
        match &self.0.kind {
            ExprKind::Index(idx) => idx.iter().map(|&i| (0, i)).collect(),
            ExprKind::Reshape => (0..self.size()).map(|i| (0, i)).collect(),
            ExprKind::Transpose => {
                let child = &self.0.children[0];
                match child.shape() {
                    Shape::Matrix(m, n) => {
                        // out is n x m; out(i, j) = child(j, i)
                        let mut v = Vec::with_capacity(m * n);
                        for j in 0..m {
                            for i in 0..n {
                                v.push((0, j + i * m));
                            }
                        }
                        v
                    }
                    _ => (0..self.size()).map(|i| (0, i)).collect(),
                }
            }
            ExprKind::Concat { axis } => concat_map(&self.0.children, *axis),
            _ => unreachable!("gather_map on non-gather node"),
        }
    }
}

fn left_mul(m: Arc<Matrix>, e: &Expr) -> Result<Expr, ExprError> {
    let es = e.shape();
    let k = es.rows();
    if m.cols != k {
        return Err(ExprError::ShapeMismatch { op: "matmul", left: Shape::Matrix(m.rows, m.cols), right: es });
    }
    let shape = match es {
        Shape::Matrix(_, n) => Shape::Matrix(m.rows, n),
        _ => Shape::Vector(m.rows),
    };
    Ok(Expr::build(ExprKind::LeftMul(m), vec![e.clone()], shape))
}

fn broadcast(op: &'static str, a: Shape, b: Shape) -> Result<Shape, ExprError> {
    if a == b || b.is_scalar() {
        Ok(a)
    } else if a.is_scalar() {
        Ok(b)
    } else {
        Err(ExprError::ShapeMismatch { op, left: a, right: b })
    }
}

fn concat(items: &[Expr], axis: u8) -> Result<Expr, ExprError> {
    if items.is_empty() {
        return Err(ExprError::Invalid { op: "stack", msg: "nothing to stack".into() });
    }
    let all_flat = items.iter().all(|e| !matches!(e.shape(), Shape::Matrix(..)));
    let shape = if axis == 1 {
        if all_flat {
            Shape::Vector(items.iter().map(Expr::size).sum())
        } else {
            let rows = items[0].shape().rows();
            if items.iter().any(|e| e.shape().rows() != rows) {
                return Err(ExprError::Invalid { op: "hstack", msg: "row counts differ".into() });
            }
            Shape::Matrix(rows, items.iter().map(|e| e.shape().cols()).sum())
        }
    } else {
        let width = |e: &Expr| match e.shape() {
            Shape::Matrix(_, n) => n,
            s => s.size(),
        };
        let height = |e: &Expr| match e.shape() {
            Shape::Matrix(m, _) => m,
            _ => 1,
        };
        let cols = width(&items[0]);
        if items.iter().any(|e| width(e) != cols) {
            return Err(ExprError::Invalid { op: "vstack", msg: "column counts differ".into() });
        }
        Shape::Matrix(items.iter().map(height).sum(), cols)
    };
    Ok(Expr::build(ExprKind::Concat { axis }, items.to_vec(), shape))
}

fn concat_map(children: &[Expr], axis: u8) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if axis == 1 {
        // column-major flat concatenation works for both vectors and matrices
        for (ci, c) in children.iter().enumerate() {
            out.extend((0..c.size()).map(|i| (ci, i)));
        }
        return out;
    }
    let cols = match children[0].shape() {
        Shape::Matrix(_, n) => n,
        s => s.size(),
    };
    // row blocks: (child, rows of child)
    let blocks: Vec<(usize, usize)> = children
        .iter()
        .enumerate()
        .map(|(i, c)| (i, if let Shape::Matrix(m, _) = c.shape() { m } else { 1 }))
        .collect();
    for j in 0..cols {
        for &(ci, m) in &blocks {
            for i in 0..m {
                out.push((ci, i + j * m));
            }
        }
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kids = &self.0.children;
        let list = |f: &mut fmt::Formatter<'_>, name: &str| -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, c) in kids.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        };
        match &self.0.kind {
            ExprKind::Variable(v) => write!(f, "{}", v.name()),
            ExprKind::Constant(vals) => {
                if vals.len() == 1 {
                    write!(f, "{}", vals[0])
                } else {
                    write!(f, "const{}", self.shape())
                }
            }
            ExprKind::Add => {
                write!(f, "(")?;
                for (i, c) in kids.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            ExprKind::Neg => write!(f, "-{}", kids[0]),
            ExprKind::Scale(s) => write!(f, "{s} * {}", kids[0]),
            ExprKind::LeftMul(_) => write!(f, "C @ {}", kids[0]),
            ExprKind::RightMul(_) => write!(f, "{} @ C", kids[0]),
            ExprKind::MulElem(_) => write!(f, "multiply(c, {})", kids[0]),
            ExprKind::Index(_) => write!(f, "{}[..]", kids[0]),
            ExprKind::Reshape => write!(f, "reshape({})", kids[0]),
            ExprKind::Sum => write!(f, "sum({})", kids[0]),
            ExprKind::Transpose => write!(f, "{}.T", kids[0]),
            ExprKind::Concat { axis } => list(f, if *axis == 1 { "hstack" } else { "vstack" }),
            ExprKind::Product => write!(f, "{} @ {}", kids[0], kids[1]),
            ExprKind::Dcp(a) => list(f, a.name()),
            ExprKind::Saddle(a) => list(f, a.name()),
            ExprKind::Extremum(se) => write!(f, "{}({}, ..)", se.direction.name(), se.body),
        }
    }
}

macro_rules! impl_ops {
    ($lhs:ty, $rhs:ty) => {
        impl core::ops::Add<$rhs> for $lhs {
            type Output = Expr;
            fn add(self, rhs: $rhs) -> Expr {
                self.try_add(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl core::ops::Sub<$rhs> for $lhs {
            type Output = Expr;
            fn sub(self, rhs: $rhs) -> Expr {
                self.try_sub(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}
impl_ops!(Expr, Expr);
impl_ops!(&Expr, &Expr);
impl_ops!(Expr, &Expr);
impl_ops!(&Expr, Expr);

impl core::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.negate()
    }
}

impl core::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.negate()
    }
}

impl core::ops::Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        rhs.scale(self)
    }
}

impl core::ops::Mul<&Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        rhs.scale(self)
    }
}

impl core::ops::Add<f64> for Expr {
    type Output = Expr;
    fn add(self, rhs: f64) -> Expr {
        self + Expr::constant(rhs)
    }
}

impl core::ops::Sub<f64> for Expr {
    type Output = Expr;
    fn sub(self, rhs: f64) -> Expr {
        self - Expr::constant(rhs)
    }
}

impl core::ops::Add<Expr> for f64 {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::constant(self) + rhs
    }
}

impl core::ops::Sub<Expr> for f64 {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::constant(self) - rhs
    }
}

impl From<&VariableDecl> for Expr {
    fn from(v: &VariableDecl) -> Expr {
        Expr::var(v)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `lhs <= rhs`
    Le,
    /// `lhs == rhs`
    Eq,
}

/// A relational constraint `lhs <= rhs` or `lhs == rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub relation: Relation,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Constraint {
    pub fn new(relation: Relation, lhs: Expr, rhs: Expr) -> Self {
        Constraint { relation, lhs, rhs }
    }

    /// `lhs - rhs`, which must be `<= 0` (convex) or `== 0` (affine).
    pub fn residual(&self) -> Result<Expr, ExprError> {
        self.lhs.try_sub(&self.rhs)
    }

    pub fn variables(&self) -> Vec<VariableDecl> {
        let mut out = BTreeMap::new();
        self.lhs.collect_vars(&mut out);
        self.rhs.collect_vars(&mut out);
        out.into_values().collect()
    }

    /// DCP validity: convex `<=` concave, or affine `==` affine.
    pub fn is_dcp(&self) -> bool {
        match self.relation {
            Relation::Le => self.lhs.is_convex() && self.rhs.is_concave(),
            Relation::Eq => self.lhs.is_affine() && self.rhs.is_affine(),
        }
    }

    pub fn substitute(&self, values: &BTreeMap<u64, Vec<f64>>) -> Constraint {
        Constraint::new(self.relation, self.lhs.substitute(values), self.rhs.substitute(values))
    }

    pub fn has_saddle_atom(&self) -> bool {
        self.lhs.has_saddle_atom() || self.rhs.has_saddle_atom()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::Le => "<=",
            Relation::Eq => "==",
        };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

#[cfg(test)]
mod tests;
