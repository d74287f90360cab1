use super::*;
use crate::atoms::{exp, inner, log, saddle_inner, square, weighted_log_sum_exp};
use crate::expr::{Matrix, Shape, VarAttrs};
use alloc::vec;
use proptest::prelude::*;

fn codes(d: &[Diagnostic]) -> Vec<DiagnosticCode> {
    d.iter().map(|d| d.code).collect()
}

#[test]
fn matrix_game_roles() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let c = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
    let f = inner(&x.expr(), &Expr::matrix(&c).matmul(&y.expr()).unwrap()).unwrap();
    let (ok, d) = is_dsp(&f);
    assert!(ok, "{d:?}");
    let r = classify_roles(&f);
    assert_eq!(r.convex_vars, vec![x]);
    assert_eq!(r.concave_vars, vec![y]);
    assert!(r.affine_vars.is_empty());
}

#[test]
fn raw_product_is_a_curvature_violation() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let f = x.expr().transpose().matmul(&y.expr()).unwrap();
    let (ok, d) = is_dsp(&f);
    assert!(!ok);
    assert_eq!(codes(&d), vec![DiagnosticCode::CurvatureViolation]);
}

#[test]
fn mixed_variables() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let f = inner(&x.expr(), &y.expr()).unwrap() + inner(&y.expr(), &x.expr()).unwrap();
    let (ok, d) = is_dsp(&f);
    assert!(!ok);
    assert!(codes(&d).contains(&DiagnosticCode::MixedVariables));
    let r = classify_roles(&f);
    assert_eq!(r.affine_vars.len(), 2);
}

#[test]
fn negation_swaps_roles() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let f = -inner(&x.expr(), &y.expr()).unwrap();
    let r = classify_roles(&f);
    assert_eq!(r.convex_vars, vec![y.clone()]);
    assert_eq!(r.concave_vars, vec![x.clone()]);
    let g = (-2.0) * inner(&x.expr(), &y.expr()).unwrap();
    assert_eq!(classify_roles(&g), r);
}

#[test]
fn convex_and_concave_terms_join_roles() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let u = VariableDecl::scalar("u");
    let v = VariableDecl::new("v", Shape::Scalar, VarAttrs::nonneg()).unwrap();
    let f = weighted_log_sum_exp(&x.expr(), &y.expr()).unwrap() + exp(&u.expr()) + log(&v.expr());
    let r = classify_roles(&f);
    assert_eq!(r.convex_vars, vec![x, u]);
    assert_eq!(r.concave_vars, vec![y, v]);
}

#[test]
fn saddle_inside_nonlinear_atom() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let f = exp(&inner(&x.expr(), &y.expr()).unwrap());
    let (ok, d) = is_dsp(&f);
    assert!(!ok);
    assert!(codes(&d).contains(&DiagnosticCode::CurvatureViolation));
}

#[test]
fn saddle_inner_monotonicity() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::new("y", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
    // F unsigned, G concave and not affine
    let f = saddle_inner(&x.expr(), &log(&y.expr())).unwrap();
    let (ok, d) = is_dsp(&f);
    assert!(!ok);
    assert!(codes(&d).contains(&DiagnosticCode::MonotonicityViolation));
    // F nonnegative: fine
    let g = saddle_inner(&square(&x.expr()), &log(&y.expr())).unwrap();
    assert!(is_dsp(&g).0, "{:?}", is_dsp(&g).1);
    // concave argument in the convex slot
    let h = saddle_inner(&log(&y.expr()), &x.expr()).unwrap();
    assert!(!is_dsp(&h).0);
}

#[test]
fn no_mixing_across_partitions() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let a = classify_roles(&inner(&x.expr(), &y.expr()).unwrap());
    let b = classify_roles(&inner(&y.expr(), &x.expr()).unwrap());
    assert!(check_no_mixing(&[a.clone(), a.clone()]).0);
    let (ok, d) = check_no_mixing(&[a, b]);
    assert!(!ok);
    assert_eq!(d.len(), 2);
}

#[test]
fn diagnostic_paths() {
    let x = VariableDecl::vector("x", 2);
    let y = VariableDecl::vector("y", 2);
    let f = square(&x.expr()).sum() + x.expr().transpose().matmul(&y.expr()).unwrap();
    let (_, d) = is_dsp(&f);
    assert_eq!(d[0].path_string(), "root.1");
}

/// Random sums of terms from a fixed pool, with random signs.
fn pool(i: usize, x: &VariableDecl, y: &VariableDecl, z: &VariableDecl, p: &VariableDecl) -> Expr {
    match i {
        0 => inner(&x.expr(), &y.expr()).unwrap(),
        1 => weighted_log_sum_exp(&x.expr(), &p.expr()).unwrap(),
        2 => square(&z.expr()).sum(),
        3 => log(&p.expr()).sum(),
        4 => z.expr().sum(),
        5 => inner(&y.expr(), &z.expr()).unwrap(),
        _ => x.expr().transpose().matmul(&z.expr()).unwrap(),
    }
}

proptest! {
    #[test]
    fn roles_partition_variables(terms in prop::collection::vec((0usize..7, any::<bool>()), 1..6)) {
        let x = VariableDecl::vector("x", 2);
        let y = VariableDecl::vector("y", 2);
        let z = VariableDecl::vector("z", 2);
        let p = VariableDecl::new("p", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
        let parts: Vec<Expr> = terms
            .iter()
            .map(|&(i, neg)| {
                let t = pool(i, &x, &y, &z, &p);
                if neg { -t } else { t }
            })
            .collect();
        let f = Expr::sum_of(&parts).unwrap();
        let (r, d) = analyze_roles(&f);
        // disjoint lists covering exactly the variables
        let mut all = r.all();
        let n = all.len();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(all, f.variables());
        for v in &r.convex_vars {
            prop_assert!(!r.is_concave(v));
        }
        // negating the whole expression swaps the sides and keeps the verdict
        let (swapped, d2) = analyze_roles(&(-f.clone()));
        prop_assert_eq!(swapped, r.swapped());
        prop_assert_eq!(codes(&d), codes(&d2));
    }
}

#[test]
fn affine_variable_stays_unassigned() {
    let x = VariableDecl::scalar("x");
    let y = VariableDecl::new("y", Shape::Scalar, VarAttrs::nonneg()).unwrap();
    let z = VariableDecl::scalar("z");
    let f = 2.5 * saddle_inner(&square(&x.expr()), &log(&y.expr())).unwrap()
        + crate::atoms::minimum(&[y.expr(), Expr::constant(1.0)]).unwrap()
        - z.expr();
    let (ok, d) = is_dsp(&f);
    assert!(ok, "{d:?}");
    let r = classify_roles(&f);
    assert_eq!((r.convex_vars, r.concave_vars, r.affine_vars), (vec![x], vec![y], vec![z]));
}
