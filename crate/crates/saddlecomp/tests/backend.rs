use saddlecomp::backend::{self, Clarabel};
use saddlecomp_core::affine::Affine;
use saddlecomp_core::cone::{dual_cone, solve_cone, ConeRows, SolverError};
use saddlecomp_core::{Cone, ConeProgram, ConeSolver, SolveStatus, SolverOptions};

fn program(obj: Affine, blocks: Vec<ConeRows>, ncols: usize) -> ConeProgram {
    ConeProgram::from_rows(&obj, &blocks, ncols, Vec::new())
}

fn col(i: usize) -> Affine {
    Affine::column(i)
}

/// Primal and dual feasibility plus a zero duality gap for
/// `min cᵀz s.t. Az + s = b, s ∈ K` and its dual `max -bᵀy s.t. Aᵀy + c = 0, y ∈ K*`.
fn assert_kkt(p: &ConeProgram, z: &[f64], y: &[f64], tol: f64) {
    assert!(p.is_feasible(z, tol), "primal infeasible");
    let mut aty = p.c.clone();
    for k in 0..p.a.nnz() {
        aty[p.a.cols[k]] += p.a.vals[k] * y[p.a.rows[k]];
    }
    assert!(aty.iter().all(|v| v.abs() < tol), "dual residual {aty:?}");
    let mut r = 0;
    for k in &p.cones {
        let n = k.len();
        assert!(dual_cone(*k).contains(&y[r..r + n], tol), "dual {:?} not in dual of {:?}", &y[r..r + n], k);
        r += n;
    }
    let primal: f64 = p.c.iter().zip(z).map(|(a, b)| a * b).sum();
    let dual: f64 = -p.b.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    assert!((primal - dual).abs() < tol, "gap {primal} vs {dual}");
}

#[test]
fn dual_exponential_rows() {
    // (u, v, w) = (-1, 0, w) in K_exp*  <=>  1 <= e·w
    let p = program(
        col(2),
        vec![
            ConeRows::zero(vec![col(0).plus(&Affine::constant(1.0)), col(1)]),
            ConeRows::new(Cone::dual_exp(), vec![col(0), col(1), col(2)]),
        ],
        3,
    );
    let sol = solve_cone(&Clarabel::new(), &p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.obj - (-1.0f64).exp()).abs() < 1e-7, "{}", sol.obj);
    assert_kkt(&p, &sol.primal, &sol.dual, 1e-6);
}

#[test]
fn exponential_rows() {
    // minimize z with (x, 1, z) in K_exp, x = 2: z >= e²
    let p = program(
        col(1),
        vec![
            ConeRows::zero(vec![col(0).minus(&Affine::constant(2.0))]),
            ConeRows::exp(col(0), Affine::constant(1.0), col(1)),
        ],
        2,
    );
    let sol = solve_cone(&Clarabel::new(), &p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.obj - 2.0f64.exp()).abs() < 1e-6, "{}", sol.obj);
    assert_kkt(&p, &sol.primal, &sol.dual, 1e-5);
}

#[test]
fn free_rows_are_dropped() {
    let p = program(
        col(0),
        vec![ConeRows::new(Cone::free(1), vec![col(0).scaled(3.0)]), ConeRows::nonneg(vec![col(0).minus(&Affine::constant(1.5))])],
        1,
    );
    let sol = solve_cone(&Clarabel::new(), &p, &SolverOptions::default()).unwrap();
    assert!((sol.obj - 1.5).abs() < 1e-7);
    assert_eq!(sol.dual.len(), 2);
    assert_eq!(sol.dual[0], 0.0);
}

#[test]
fn second_order_rows() {
    // minimize t with ||(3, 4)|| <= t
    let p = program(col(0), vec![ConeRows::soc(vec![col(0), Affine::constant(3.0), Affine::constant(4.0)])], 1);
    let sol = solve_cone(&Clarabel::new(), &p, &SolverOptions::default()).unwrap();
    assert!((sol.obj - 5.0).abs() < 1e-7);
    assert_kkt(&p, &sol.primal, &sol.dual, 1e-6);
}

#[test]
fn infeasible_and_unbounded() {
    let s = Clarabel::new();
    let infeasible = program(
        col(0),
        vec![ConeRows::nonneg(vec![col(0).minus(&Affine::constant(1.0)), col(0).neg()])],
        1,
    );
    assert_eq!(solve_cone(&s, &infeasible, &SolverOptions::default()).unwrap().status, SolveStatus::Infeasible);
    let unbounded = program(col(0), vec![ConeRows::nonneg(vec![col(0).neg()])], 1);
    assert_eq!(solve_cone(&s, &unbounded, &SolverOptions::default()).unwrap().status, SolveStatus::Unbounded);
}

fn psd_program() -> ConeProgram {
    // X = [[a, b], [b, c]] ⪰ 0 with b = 1, minimize a + c
    let r2 = std::f64::consts::SQRT_2;
    program(
        col(0).plus(&col(2)),
        vec![
            ConeRows::zero(vec![col(1).minus(&Affine::constant(1.0))]),
            ConeRows::new(Cone::psd(2), vec![col(0), col(1).scaled(r2), col(2)]),
        ],
        3,
    )
}

#[test]
fn psd_capability() {
    let p = psd_program();
    let err = solve_cone(&Clarabel::without_psd(), &p, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, SolverError::Capability { capability: "PSD", .. }));
    if Clarabel::new().supports_psd() {
        let sol = solve_cone(&Clarabel::new(), &p, &SolverOptions::default()).unwrap();
        assert!((sol.obj - 2.0).abs() < 1e-6, "{}", sol.obj);
        assert_kkt(&p, &sol.primal, &sol.dual, 1e-5);
    }
}

#[test]
fn malformed_program_is_rejected() {
    let mut p = program(col(0), vec![ConeRows::nonneg(vec![col(0)])], 1);
    p.b.push(0.0);
    assert!(matches!(solve_cone(&Clarabel::new(), &p, &SolverOptions::default()), Err(SolverError::Malformed(_))));
}

#[test]
fn backend_names() {
    assert_eq!(backend::by_name("").unwrap().name(), Clarabel::new().name());
    assert!(!backend::by_name("clarabel-nopsd").unwrap().supports_psd());
    assert!(backend::by_name("nope").is_err());
}
