use super::*;
use crate::atoms::{abs, log, square, sum_squares};
use crate::cone::ConeKind;
use crate::expr::{Matrix, Shape, VarAttrs};
use proptest::prelude::*;

fn kinds(rb: &RowBuilder) -> Vec<ConeKind> {
    rb.blocks.iter().map(|b| b.cone.kind).collect()
}

#[test]
fn convex_atoms_become_epigraph_rows() {
    let x = VariableDecl::vector("x", 3);
    let mut rb = RowBuilder::auto();
    let t = rb.lower(&sum_squares(&x.expr()), Bound::Upper).unwrap();
    assert_eq!(t.len(), 1);
    assert!(kinds(&rb).contains(&ConeKind::SecondOrder), "{:?}", kinds(&rb));

    let mut rb = RowBuilder::auto();
    let t = rb.lower(&abs(&x.expr()), Bound::Upper).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(kinds(&rb), vec![ConeKind::NonNeg; rb.blocks.len()]);
    // t = |x| satisfies every row
    let mut z = vec![0.0; rb.ncols];
    z[..3].copy_from_slice(&[1.0, -2.0, 0.5]);
    for (i, ti) in t.iter().enumerate() {
        z[ti.max_column().unwrap()] = [1.0, 2.0, 0.5][i];
    }
    for b in &rb.blocks {
        assert!(b.rows.iter().all(|r| r.eval(&z) >= -1e-12));
    }
}

#[test]
fn wrong_direction_is_rejected() {
    let x = VariableDecl::vector("x", 2);
    let mut rb = RowBuilder::auto();
    assert!(matches!(rb.lower(&abs(&x.expr()), Bound::Lower), Err(CanonError::NotDcp(_))));
    assert!(matches!(rb.lower(&square(&x.expr()), Bound::Exact), Err(CanonError::NotDcp(_))));
    let p = VariableDecl::new("p", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
    assert!(rb.lower(&log(&p.expr()), Bound::Lower).is_ok());
    assert!(rb.lower(&log(&p.expr()), Bound::Upper).is_err());
}

#[test]
fn unbound_variables_need_auto() {
    let x = VariableDecl::vector("x", 2);
    let mut rb = RowBuilder::new();
    assert_eq!(rb.lower(&x.expr(), Bound::Exact), Err(CanonError::UnboundVariable("x".into())));
    rb.bind(&x);
    assert_eq!(rb.lower(&x.expr(), Bound::Exact).unwrap(), vec![Affine::column(0), Affine::column(1)]);
}

#[test]
fn variable_attributes() {
    let p = VariableDecl::new("p", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
    let s = VariableDecl::new("S", Shape::Matrix(2, 2), VarAttrs { psd: true, ..VarAttrs::NONE }).unwrap();
    let mut rb = RowBuilder::auto();
    rb.add_var_attrs(&p).unwrap();
    rb.add_var_attrs(&s).unwrap();
    assert_eq!(kinds(&rb), vec![ConeKind::NonNeg, ConeKind::Zero, ConeKind::PsdTriangle]);
    assert_eq!(rb.blocks[1].rows.len(), 1);
    assert_eq!(rb.blocks[2].rows.len(), 3);
}

#[test]
fn constraints_in_standard_form() {
    let x = VariableDecl::vector("x", 2);
    let mut rb = RowBuilder::auto();
    rb.add_constraint(&x.expr().le_const(1.0)).unwrap();
    rb.add_constraint(&x.expr().sum().eq_const(1.0)).unwrap();
    assert_eq!(kinds(&rb), vec![ConeKind::NonNeg, ConeKind::Zero]);
    // 1 - x >= 0 at x = (0.5, 0.5), and 1ᵀx - 1 = 0
    let z = [0.5, 0.5];
    assert!(rb.blocks[0].rows.iter().all(|r| (r.eval(&z) - 0.5).abs() < 1e-12));
    assert!(rb.blocks[1].rows[0].eval(&z).abs() < 1e-12);
    let bad = square(&x.expr()).ge(&x.expr());
    assert!(matches!(rb.add_constraint(&bad), Err(CanonError::NotDcp(_))));
}

#[test]
fn canonicalize_checks_and_negates() {
    let x = VariableDecl::vector("x", 2);
    let p = VariableDecl::new("p", Shape::Scalar, VarAttrs::nonneg()).unwrap();
    let e = canonicalize_dcp(&log(&p.expr()), Sense::Minimize, &[]).unwrap_err();
    assert!(matches!(e, CanonError::NotDcp(_)));

    let lp = canonicalize_dcp(&x.expr().sum(), Sense::Maximize, &[x.expr().le_const(1.0)]).unwrap();
    let s = lp.vars.iter().find(|(v, _)| *v == x).unwrap().1;
    assert_eq!(&lp.program.c[s..s + 2], &[-1.0, -1.0]);
    let v = lp.program.objective_value(&[1.0, 1.0]);
    assert_eq!(lp.value_from(v), 2.0);
    assert_eq!(lp.extract(&[3.0, 4.0]), vec![(x, vec![3.0, 4.0])]);
}

proptest! {
    #[test]
    fn affine_lowering_matches_evaluation(
        u in prop::collection::vec(-5.0f64..5.0, 3),
        w in prop::collection::vec(-5.0f64..5.0, 2),
        k in -3.0f64..3.0,
    ) {
        let x = VariableDecl::vector("x", 3);
        let y = VariableDecl::vector("y", 2);
        let c = Matrix::from_rows(&[&[1.0, -2.0, 0.5], &[0.0, 3.0, 1.0]]);
        let e = Expr::matrix(&c).matmul(&(k * x.expr())).unwrap() - y.expr() + Expr::vector(&[1.0, -1.0]);
        let e = Expr::vstack(&[e, y.expr()]).unwrap().transpose().reshape(Shape::Vector(4)).unwrap();
        let mut rb = RowBuilder::new();
        let sx = rb.bind(&x);
        let sy = rb.bind(&y);
        let rows = rb.lower(&e, Bound::Exact).unwrap();
        prop_assert!(rb.blocks.is_empty());
        let mut z = vec![0.0; rb.ncols];
        z[sx..sx + 3].copy_from_slice(&u);
        z[sy..sy + 2].copy_from_slice(&w);
        let at: BTreeMap<u64, Vec<f64>> = [(x.id(), u.clone()), (y.id(), w.clone())].into_iter().collect();
        let direct = e.eval(&at).unwrap();
        prop_assert_eq!(rows.len(), direct.len());
        for (r, d) in rows.iter().zip(&direct) {
            prop_assert!((r.eval(&z) - d).abs() < 1e-9);
        }
    }
}
