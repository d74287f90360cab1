use saddlecomp::backend::Clarabel;
use saddlecomp_core::*;

#[test]
fn matrix_game() {
    let x = VariableDecl::new("x", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
    let y = VariableDecl::new("y", Shape::Vector(2), VarAttrs::nonneg()).unwrap();
    let c = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
    let f = inner(&x.expr(), &Expr::matrix(&c).matmul(&y.expr()).unwrap()).unwrap();
    let cons = vec![x.expr().sum().eq_const(1.0), y.expr().sum().eq_const(1.0)];
    let p = SaddlePointProblem::new(MinimizeMaximize::new(f), cons);
    let mut store = ValueStore::new();
    let r = p.solve(&Clarabel::new(), &SaddleOptions::default(), &mut store);
    println!("{r:?}");
    assert_eq!(r.status, ReportStatus::Solved);
    assert!((r.value - 5.0 / 3.0).abs() < 1e-6);
}

fn fixed_min(obj: Expr, x: &VariableDecl, x0: &[f64]) -> SolveReport {
    let p = SaddleProblem::new(Objective::Minimize(obj), vec![x.expr().equals(&Expr::vector(x0))]);
    let mut store = ValueStore::new();
    p.solve(&Clarabel::new(), &SolverOptions::default(), &mut store)
}

fn local_vec(name: &str, n: usize) -> VariableDecl {
    VariableDecl::new(name, Shape::Vector(n), VarAttrs::local()).unwrap()
}

#[test]
fn box_max() {
    let x = VariableDecl::vector("x", 3);
    let y = local_vec("y", 3);
    let (l, u) = ([-1.0, 0.5, -2.0], [2.0, 1.0, 3.0]);
    let x0 = [1.5, -2.0, 0.3];
    let se = saddle_max(
        &inner(&x.expr(), &y.expr()).unwrap(),
        &[y.expr().ge(&Expr::vector(&l)), y.expr().le(&Expr::vector(&u))],
    )
    .unwrap();
    let r = fixed_min(se, &x, &x0);
    let want: f64 = (0..3).map(|i| 0.5 * (u[i] + l[i]) * x0[i] + 0.5 * (u[i] - l[i]) * x0[i].abs()).sum();
    println!("{r:?}");
    assert!((r.value - want).abs() < 1e-6, "{} vs {}", r.value, want);
}

#[test]
fn k_largest() {
    let x = VariableDecl::vector("x", 5);
    let y = local_vec("y", 5);
    let x0 = [0.3, -1.0, 2.0, 0.7, 1.1];
    let se = saddle_max(
        &inner(&x.expr(), &y.expr()).unwrap(),
        &[y.expr().ge_const(0.0), y.expr().le_const(1.0), y.expr().sum().eq_const(2.0)],
    )
    .unwrap();
    let r = fixed_min(se, &x, &x0);
    assert!((r.value - 3.1).abs() < 1e-6, "{}", r.value);
}

#[test]
fn wlse_simplex() {
    let x = VariableDecl::vector("x", 4);
    let y = local_vec("y", 4);
    let x0 = [0.3, -1.0, 2.0, 0.7];
    let se = saddle_max(
        &weighted_log_sum_exp(&x.expr(), &y.expr()).unwrap(),
        &[y.expr().ge_const(0.0), y.expr().sum().eq_const(1.0)],
    )
    .unwrap();
    let r = fixed_min(se, &x, &x0);
    println!("{r:?}");
    assert!((r.value - 2.0).abs() < 1e-6, "{}", r.value);
}

#[test]
fn box_min() {
    let y = VariableDecl::vector("y", 2);
    let x = local_vec("x", 2);
    let y0 = [1.0, -3.0];
    let se = saddle_min(
        &inner(&x.expr(), &y.expr()).unwrap(),
        &[x.expr().ge_const(-1.0), x.expr().le_const(2.0)],
    )
    .unwrap();
    let p = SaddleProblem::new(Objective::Maximize(se), vec![y.expr().equals(&Expr::vector(&y0))]);
    let mut store = ValueStore::new();
    let r = p.solve(&Clarabel::new(), &SolverOptions::default(), &mut store);
    // min over x of x·y0 on [-1,2]^2 = -1 + -6
    assert!((r.value + 7.0).abs() < 1e-6, "{:?}", r);
}

#[test]
fn markowitz_worst_case() {
    use saddlecomp_core::atoms::abs;
    let n = 3;
    let mu = [0.08, 0.1, 0.12];
    let sig = Matrix::from_rows(&[&[0.04, 0.006, 0.01], &[0.006, 0.09, 0.012], &[0.01, 0.012, 0.16]]);
    let rho = [0.01, 0.02, 0.015];
    let (gamma, eta) = (2.0, 0.1);
    let w = VariableDecl::vector("w", n);
    let d = local_vec("delta", n);
    let s = VariableDecl::new("Sigma", Shape::Matrix(n, n), VarAttrs { psd: true, local: true, ..VarAttrs::NONE }).unwrap();
    let mut bound = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            bound.set(i, j, eta * (sig.get(i, i) * sig.get(j, j)).sqrt());
        }
    }
    let body = inner(&(d.expr() + Expr::vector(&mu)), &w.expr()).unwrap()
        - gamma * saddle_quad_form(&w.expr(), &s.expr()).unwrap();
    let se = saddle_min(
        &body,
        &[
            abs(&d.expr()).le(&Expr::vector(&rho)),
            abs(&(s.expr() - Expr::matrix(&sig))).le(&Expr::matrix(&bound)),
        ],
    )
    .unwrap();
    let w0 = [0.5, 0.3, 0.2];
    let p = SaddleProblem::new(Objective::Maximize(se), vec![w.expr().equals(&Expr::vector(&w0))]);
    let mut store = ValueStore::new();
    let r = p.solve(&Clarabel::new(), &SolverOptions::default(), &mut store);
    let quad: f64 = (0..n).map(|i| (0..n).map(|j| w0[i] * sig.get(i, j) * w0[j]).sum::<f64>()).sum();
    let l1: f64 = (0..n).map(|i| sig.get(i, i).sqrt() * w0[i].abs()).sum();
    let want = (0..n).map(|i| mu[i] * w0[i] - rho[i] * w0[i].abs()).sum::<f64>() - gamma * quad - gamma * eta * l1 * l1;
    println!("{r:?}");
    assert!((r.value - want).abs() < 1e-6, "{} vs {}", r.value, want);
}
