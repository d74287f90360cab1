use super::*;
use crate::expr::{Curvature, Expr, ExprError, Matrix, Shape, VarAttrs, VariableDecl};
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;

fn at(pairs: &[(&VariableDecl, &[f64])]) -> BTreeMap<u64, Vec<f64>> {
    pairs.iter().map(|(v, x)| (v.id(), x.to_vec())).collect()
}

fn xy(n: usize) -> (VariableDecl, VariableDecl) {
    (VariableDecl::vector("x", n), VariableDecl::vector("y", n))
}

#[test]
fn eval_formulas() {
    let (x, y) = xy(3);
    let xv = [1.0, -2.0, 0.5];
    let yv = [0.5, 2.0, 1.0];
    let vals = at(&[(&x, &xv), (&y, &yv)]);
    let ev = |e: Expr| e.eval_scalar(&vals).unwrap();
    assert!((ev(inner(&x.expr(), &y.expr()).unwrap()) - (0.5 - 4.0 + 0.5)).abs() < 1e-12);
    let wn: f64 = libm::sqrt(0.5 * 1.0 + 2.0 * 4.0 + 0.25);
    assert!((ev(weighted_norm2(&x.expr(), &y.expr()).unwrap()) - wn).abs() < 1e-12);
    let wl: f64 = libm::log(0.5 * libm::exp(1.0) + 2.0 * libm::exp(-2.0) + libm::exp(0.5));
    assert!((ev(weighted_log_sum_exp(&x.expr(), &y.expr()).unwrap()) - wl).abs() < 1e-12);
    let si = ev(saddle_inner(&square(&x.expr()), &y.expr()).unwrap());
    assert!((si - (0.5 + 8.0 + 0.25)).abs() < 1e-12);
}

#[test]
fn wlse_is_stable_for_large_arguments() {
    let (x, y) = xy(2);
    let vals = at(&[(&x, &[800.0, 801.0]), (&y, &[1.0, 1.0])]);
    let v = weighted_log_sum_exp(&x.expr(), &y.expr()).unwrap().eval_scalar(&vals).unwrap();
    assert!((v - (801.0 + libm::log(1.0 + libm::exp(-1.0)))).abs() < 1e-9, "{v}");
}

#[test]
fn quad_forms() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 1);
    let p = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
    let q = Matrix::from_rows(&[&[-3.0]]);
    let s = Matrix::from_rows(&[&[1.0], &[0.5]]);
    let e = quasidef_quad_form(&x.expr(), &y.expr(), &p, &q, &s).unwrap();
    let vals = at(&[(&x, &[1.0, 2.0]), (&y, &[2.0])]);
    // 2 + 4 + 2·(1·2 + 2·0.5·2) - 12
    assert!((e.eval_scalar(&vals).unwrap() - 2.0).abs() < 1e-12);

    let w = VariableDecl::vector("w", 2);
    let big = VariableDecl::new("S", Shape::Matrix(2, 2), VarAttrs { psd: true, ..VarAttrs::NONE }).unwrap();
    let e = saddle_quad_form(&w.expr(), &big.expr()).unwrap();
    let vals = at(&[(&w, &[1.0, -1.0]), (&big, &[2.0, 0.5, 0.5, 1.0])]);
    assert!((e.eval_scalar(&vals).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn indefinite_quasidef_is_rejected() {
    let (x, y) = xy(2);
    let p = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
    let q = Matrix::from_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]);
    let s = Matrix::zeros(2, 2);
    let e = quasidef_quad_form(&x.expr(), &y.expr(), &p, &q, &s).unwrap_err();
    assert!(matches!(e, ExprError::Indefinite { which: "P", .. }));
    let e = quasidef_quad_form(&x.expr(), &y.expr(), &q, &q, &s).unwrap_err();
    assert!(matches!(e, ExprError::Indefinite { which: "P", .. }));
    let e = quasidef_quad_form(&x.expr(), &y.expr(), &Matrix::zeros(2, 2), &p, &s).unwrap_err();
    assert!(matches!(e, ExprError::Indefinite { which: "-Q", .. }));
    assert!(quasidef_quad_form(&x.expr(), &y.expr(), &Matrix::zeros(2, 2), &Matrix::zeros(2, 2), &s).is_ok());
}

#[test]
fn fixed_side_curvature() {
    let (x, y) = xy(2);
    let yc = Expr::vector(&[1.0, 2.0]);
    let xc = Expr::vector(&[0.5, -1.0]);
    assert_eq!(weighted_log_sum_exp(&x.expr(), &yc).unwrap().curvature(), Curvature::Convex);
    assert_eq!(weighted_log_sum_exp(&xc, &y.expr()).unwrap().curvature(), Curvature::Concave);
    assert_eq!(weighted_norm2(&x.expr(), &yc).unwrap().curvature(), Curvature::Convex);
    assert_eq!(weighted_norm2(&xc, &y.expr()).unwrap().curvature(), Curvature::Concave);
    assert_eq!(inner(&x.expr(), &yc).unwrap().curvature(), Curvature::Affine);
    assert_eq!(inner(&x.expr(), &y.expr()).unwrap().curvature(), Curvature::Unknown);
    // negative weights break convexity in x
    let neg = Expr::vector(&[1.0, -2.0]);
    assert_eq!(weighted_log_sum_exp(&x.expr(), &neg).unwrap().curvature(), Curvature::Unknown);
    let s = Expr::matrix(&Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]));
    assert_eq!(saddle_quad_form(&x.expr(), &s).unwrap().curvature(), Curvature::Convex);
}

#[test]
fn attachments() {
    let (x, y) = xy(2);
    assert_eq!(weighted_log_sum_exp(&x.expr(), &y.expr()).unwrap().attached_constraints().len(), 1);
    let p = VariableDecl::new("p", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
    assert!(weighted_norm2(&x.expr(), &p.expr()).unwrap().attached_constraints().is_empty());
    assert!(saddle_inner(&x.expr(), &y.expr()).unwrap().attached_constraints().is_empty());
    assert_eq!(saddle_inner(&square(&x.expr()), &y.expr()).unwrap().attached_constraints().len(), 1);
}

#[test]
fn size_mismatch() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 3);
    assert!(inner(&x.expr(), &y.expr()).is_err());
    assert!(saddle_quad_form(&x.expr(), &y.expr()).is_err());
}

/// Saddle atom `atom` at `(x, y)`, all of size 3.
fn saddle_values(atom: usize, x: &[f64], y: &[f64]) -> f64 {
    match atom {
        0 => SaddleAtom::WeightedLogSumExp.eval(x, y, Shape::Vector(3)),
        1 => SaddleAtom::WeightedNorm2.eval(x, y, Shape::Vector(3)),
        2 => SaddleAtom::Inner.eval(x, y, Shape::Vector(3)),
        _ => {
            let p = Matrix::from_rows(&[&[2.0, 0.5, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 0.3]]);
            let q = Matrix::from_rows(&[&[-1.0, 0.2, 0.0], &[0.2, -1.5, 0.0], &[0.0, 0.0, -0.1]]);
            let s = Matrix::from_rows(&[&[0.3, -1.0, 0.0], &[0.7, 0.4, 2.0], &[1.0, 0.0, 0.0]]);
            let atom = SaddleAtom::QuasidefQuadForm { p: p.into(), q: q.into(), s: s.into() };
            atom.eval(x, y, Shape::Vector(3))
        }
    }
}

proptest! {
    #[test]
    fn convex_concave_midpoints(
        atom in 0usize..4,
        x1 in prop::collection::vec(-3.0f64..3.0, 3),
        x2 in prop::collection::vec(-3.0f64..3.0, 3),
        y1 in prop::collection::vec(0.01f64..3.0, 3),
        y2 in prop::collection::vec(0.01f64..3.0, 3),
    ) {
        let mid = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect() };
        let xm = mid(&x1, &x2);
        let ym = mid(&y1, &y2);
        let f = |x: &[f64], y: &[f64]| saddle_values(atom, x, y);
        let slack = 1e-9 * (1.0 + f(&x1, &y1).abs() + f(&x2, &y1).abs());
        // convex in x for fixed y
        prop_assert!(f(&xm, &y1) <= 0.5 * (f(&x1, &y1) + f(&x2, &y1)) + slack);
        // concave in y for fixed x
        prop_assert!(f(&x1, &ym) >= 0.5 * (f(&x1, &y1) + f(&x1, &y2)) - slack);
    }

    #[test]
    fn wlse_simplex_sup_is_max(x in prop::collection::vec(-5.0f64..5.0, 1..6), w in prop::collection::vec(0.0f64..1.0, 6)) {
        // any simplex weight stays below max(x), a vertex attains it
        let n = x.len();
        let total: f64 = w[..n].iter().sum::<f64>() + 1e-9;
        let y: Vec<f64> = w[..n].iter().map(|v| (v + 1e-9 / n as f64) / total).collect();
        let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(SaddleAtom::WeightedLogSumExp.eval(&x, &y, Shape::Vector(n)) <= m + 1e-9);
        let k = x.iter().position(|v| *v == m).unwrap();
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        prop_assert!((SaddleAtom::WeightedLogSumExp.eval(&x, &e, Shape::Vector(n)) - m).abs() < 1e-12);
    }
}
