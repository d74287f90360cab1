use super::*;
use crate::atoms::{abs, exp, log, norm2, sqrt, square, sum_squares};
use proptest::prelude::*;

fn vals(pairs: &[(&VariableDecl, &[f64])]) -> BTreeMap<u64, Vec<f64>> {
    pairs.iter().map(|(v, x)| (v.id(), x.to_vec())).collect()
}

#[test]
fn variable_identity() {
    let a = VariableDecl::vector("x", 2);
    let b = VariableDecl::vector("x", 2);
    assert_ne!(a, b);
    assert_eq!(a.clone(), a);
    assert!(VariableDecl::new("S", Shape::Vector(3), VarAttrs { psd: true, ..VarAttrs::NONE }).is_err());
}

#[test]
fn shape_errors() {
    let x = VariableDecl::vector("x", 2).expr();
    let y = VariableDecl::vector("y", 3).expr();
    assert!(matches!(x.try_add(&y), Err(ExprError::ShapeMismatch { .. })));
    assert!(x.at(2).is_err());
    let m = Expr::matrix(&Matrix::from_rows(&[&[1.0, 2.0]]));
    assert!(m.matmul(&y).is_err());
    assert_eq!(m.matmul(&x).unwrap().shape(), Shape::Vector(1));
}

#[test]
fn column_major_layout() {
    let m = Expr::matrix(&Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]));
    let none = BTreeMap::new();
    assert_eq!(m.eval(&none).unwrap(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    assert_eq!(m.transpose().eval(&none).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(m.at2(0, 2).unwrap().eval(&none).unwrap(), vec![3.0]);
    assert_eq!(m.reshape(Shape::Vector(6)).unwrap().slice(1, 3).unwrap().eval(&none).unwrap(), vec![4.0, 2.0]);
    let h = Expr::hstack(&[m.clone(), m.clone()]).unwrap();
    assert_eq!(h.shape(), Shape::Matrix(2, 6));
    assert_eq!(Expr::vstack(&[m.clone(), m]).unwrap().shape(), Shape::Matrix(4, 3));
}

#[test]
fn dcp_curvature() {
    let x = VariableDecl::vector("x", 3);
    let p = VariableDecl::new("p", Shape::Vector(3), VarAttrs::nonneg()).unwrap();
    assert_eq!(sum_squares(&x.expr()).curvature(), Curvature::Convex);
    assert_eq!(log(&p.expr()).sum().curvature(), Curvature::Concave);
    assert_eq!((-log(&p.expr())).curvature(), Curvature::Convex);
    assert_eq!(norm2(&(2.0 * x.expr() - Expr::vector(&[1.0, 2.0, 3.0]))).curvature(), Curvature::Convex);
    // sqrt is concave nondecreasing: sqrt(convex) has no verdict
    assert_eq!(sqrt(&square(&x.expr())).curvature(), Curvature::Unknown);
    assert_eq!(exp(&abs(&x.expr())).curvature(), Curvature::Convex);
    assert_eq!(square(&x.expr()).sign(), Sign::NonNegative);
    let prod = x.expr().transpose().matmul(&p.expr()).unwrap();
    assert_eq!(prod.curvature(), Curvature::Unknown);
    assert!(matches!(prod.kind(), ExprKind::Product));
}

#[test]
fn substitute_fixes_variables() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let e = crate::atoms::inner(&x.expr(), &y.expr()).unwrap() + sum_squares(&x.expr());
    let fixed = vals(&[(&x, &[1.0, -2.0])]);
    let s = e.substitute(&fixed);
    assert_eq!(s.variables(), vec![y.clone()]);
    let at = vals(&[(&y, &[0.5, 3.0])]);
    let full = vals(&[(&x, &[1.0, -2.0]), (&y, &[0.5, 3.0])]);
    assert!((s.eval_scalar(&at).unwrap() - e.eval_scalar(&full).unwrap()).abs() < 1e-12);
    // with x fixed the saddle atom is affine in y
    assert!(s.is_affine());
}

#[test]
fn missing_values_are_reported() {
    let x = VariableDecl::vector("x", 2);
    let e = x.expr().sum();
    assert!(matches!(e.eval(&BTreeMap::new()), Err(EvalError::MissingValue(_))));
    let bad = vals(&[(&x, &[1.0])]);
    assert!(matches!(e.eval(&bad), Err(EvalError::WrongSize { .. })));
}

proptest! {
    #[test]
    fn affine_maps_are_linear(
        a in -3.0f64..3.0, b in -3.0f64..3.0,
        u in prop::collection::vec(-5.0f64..5.0, 3),
        v in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let x = VariableDecl::vector("x", 3);
        let c = Matrix::from_rows(&[&[1.0, -2.0, 0.5], &[0.0, 3.0, 1.0]]);
        let f = |e: Expr| Expr::matrix(&c).matmul(&e).unwrap().sum();
        let lin = f(x.expr());
        let at = |z: &[f64]| lin.eval_scalar(&vals(&[(&x, z)])).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        prop_assert!((at(&w) - (a * at(&u) + b * at(&v))).abs() < 1e-9);
    }

    #[test]
    fn convex_atoms_satisfy_midpoint_inequality(
        u in prop::collection::vec(-3.0f64..3.0, 4),
        v in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let x = VariableDecl::vector("x", 4);
        let exprs = [
            sum_squares(&x.expr()),
            norm2(&x.expr()),
            crate::atoms::log_sum_exp(&x.expr()),
            crate::atoms::norm1(&x.expr()),
            crate::atoms::norm_inf(&x.expr()),
            crate::atoms::pos(&x.expr()).sum(),
        ];
        let mid: Vec<f64> = u.iter().zip(&v).map(|(p, q)| 0.5 * (p + q)).collect();
        for e in &exprs {
            prop_assert_eq!(e.curvature(), Curvature::Convex);
            let at = |z: &[f64]| e.eval_scalar(&vals(&[(&x, z)])).unwrap();
            prop_assert!(at(&mid) <= 0.5 * (at(&u) + at(&v)) + 1e-9, "{}", e);
        }
    }

    #[test]
    fn stacking_preserves_entries(u in prop::collection::vec(-5.0f64..5.0, 3), v in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = VariableDecl::vector("x", 3);
        let y = VariableDecl::vector("y", 3);
        let at = vals(&[(&x, &u), (&y, &v)]);
        // hstack of vectors concatenates
        let h = Expr::hstack(&[x.expr(), y.expr()]).unwrap().eval(&at).unwrap();
        let cat: Vec<f64> = u.iter().chain(&v).copied().collect();
        prop_assert_eq!(h, cat);
        // vstack of vectors stacks rows
        let s = Expr::vstack(&[x.expr(), y.expr()]).unwrap();
        prop_assert_eq!(s.shape(), Shape::Matrix(2, 3));
        for j in 0..3 {
            prop_assert_eq!(s.at2(0, j).unwrap().eval(&at).unwrap()[0], u[j]);
            prop_assert_eq!(s.at2(1, j).unwrap().eval(&at).unwrap()[0], v[j]);
        }
    }
}
