//! Demo corpus with synthetic, embedded data. Every demo prints a small
//! table and runs property checks on its own output.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saddlecomp_core::atoms::{abs, exp, norm1, norm_inf, pos, sum_squares};
use saddlecomp_core::linalg::solve_dense;
use saddlecomp_core::problem::Extremum;
use saddlecomp_core::{
    inner, saddle_inner, saddle_max, saddle_min, saddle_quad_form, ConeSolver, Constraint,
    Expr, Matrix, MinimizeMaximize, Objective, ReportStatus, SaddleOptions, SaddlePointProblem, SaddleProblem,
    Shape, SolveReport, SolverOptions, ValueStore, VarAttrs, VariableDecl,
};

pub const NAMES: [&str; 6] =
    ["matrix_game", "robust_lp", "robust_production", "robust_bond_synthetic", "robust_weights_synthetic", "robust_markowitz"];

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct DemoReport {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
    pub checks: Vec<Check>,
}

impl DemoReport {
    fn new(name: &str, title: &str, columns: &[&str]) -> Self {
        DemoReport {
            name: name.into(),
            title: title.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    fn row(&mut self, label: &str, cells: Vec<String>) {
        self.rows.push((label.into(), cells));
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        let label_w = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(1);
        let mut widths: Vec<usize> = self.columns.iter().map(String::len).collect();
        for (_, cells) in &self.rows {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        write!(f, "{:label_w$}", "")?;
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(f, "  {c:>w$}")?;
        }
        writeln!(f)?;
        for (label, cells) in &self.rows {
            write!(f, "{label:label_w$}")?;
            for (c, w) in cells.iter().zip(&widths) {
                write!(f, "  {c:>w$}")?;
            }
            writeln!(f)?;
        }
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DemoError {
    UnknownDemo(String),
    /// The backend lacks a capability the demo needs.
    Capability(String),
    Failed(String),
}

impl fmt::Display for DemoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemoError::UnknownDemo(n) => write!(f, "unknown demo `{n}` (available: {})", NAMES.join(", ")),
            DemoError::Capability(m) => write!(f, "capability error: {m}"),
            DemoError::Failed(m) => write!(f, "demo failed: {m}"),
        }
    }
}

impl std::error::Error for DemoError {}

pub fn run(name: &str, solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    match name {
        "matrix_game" => matrix_game(solver),
        "robust_lp" => robust_lp(solver),
        "robust_production" => robust_production(solver),
        "robust_bond_synthetic" => robust_bond(solver),
        "robust_weights_synthetic" => robust_weights(solver),
        "robust_markowitz" => robust_markowitz(solver),
        other => Err(DemoError::UnknownDemo(other.into())),
    }
}

fn fail<E: fmt::Display>(e: E) -> DemoError {
    DemoError::Failed(e.to_string())
}

fn num(x: f64) -> String {
    format!("{x:.7}")
}

fn vec_str(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn local(name: &str, shape: Shape) -> VariableDecl {
    VariableDecl::new(name, shape, VarAttrs::local()).unwrap()
}

fn nonneg_vec(name: &str, n: usize) -> VariableDecl {
    VariableDecl::new(name, Shape::Vector(n), VarAttrs::nonneg()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn expect_solved(r: SolveReport) -> Result<SolveReport, DemoError> {
    match r.status {
        ReportStatus::Solved => Ok(r),
        _ => Err(DemoError::Failed(format!("{}: {}", r.status.as_str(), r.message))),
    }
}

fn solve_convex(p: &SaddleProblem, solver: &dyn ConeSolver) -> Result<SolveReport, DemoError> {
    if p.lower().map(|l| l.program.needs_psd()).unwrap_or(false) && !solver.supports_psd() {
        return Err(DemoError::Capability(format!("backend `{}` does not support PSD cones", solver.name())));
    }
    expect_solved(p.solve(solver, &SolverOptions::default(), &mut ValueStore::new()))
}

fn value(r: &SolveReport, v: &VariableDecl) -> Vec<f64> {
    r.value_of(v).map(<[f64]>::to_vec).unwrap_or_default()
}

fn extremum(e: &Expr) -> std::sync::Arc<Extremum> {
    e.extremum_nodes().into_iter().next().expect("expression is a saddle extremum")
}

/// Value of a saddle extremum with its outer variables fixed.
fn eval_at(se: &Expr, fixed: &[(&VariableDecl, &[f64])], solver: &dyn ConeSolver) -> Result<f64, DemoError> {
    let mut store = ValueStore::new();
    for (v, x) in fixed {
        store.set(v, x.to_vec());
    }
    extremum(se).evaluate(&store, solver, &SolverOptions::default()).map(|(v, _)| v).map_err(fail)
}

/// Vertices of the bounded polyhedron `{x : A x <= b}` by enumeration of
/// `n`-subsets of active constraints.
pub fn polytope_vertices(a: &Matrix, b: &[f64]) -> Vec<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    if n > m {
        return out;
    }
    loop {
        let mut sub = Matrix::zeros(n, n);
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..n {
                sub.set(r, j, a.get(i, j));
            }
        }
        let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        if let Some(x) = solve_dense(&sub, &rhs) {
            let feasible = (0..m).all(|i| (0..n).map(|j| a.get(i, j) * x[j]).sum::<f64>() <= b[i] + 1e-9);
            let dup = out.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-9));
            if feasible && !dup && x.iter().all(|v| v.is_finite()) {
                out.push(x);
            }
        }
        // next combination
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] < m - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn box_rows(lo: &[f64], hi: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = lo.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        rows.push(r.clone());
        rhs.push(hi[i]);
        r[i] = -1.0;
        rows.push(r);
        rhs.push(-lo[i]);
    }
    (rows, rhs)
}

fn polytope_constraints(c: &VariableDecl, rows: &[Vec<f64>], rhs: &[f64]) -> Vec<Constraint> {
    let a = Matrix::from_row_vecs(rows);
    vec![Expr::matrix(&a).matmul(&c.expr()).unwrap().le(&Expr::vector(rhs))]
}

// ---------------------------------------------------------------- demos

fn matrix_game(solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    let x = nonneg_vec("x", 2);
    let y = nonneg_vec("y", 2);
    let c = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
    let f = inner(&x.expr(), &Expr::matrix(&c).matmul(&y.expr()).map_err(fail)?).map_err(fail)?;
    let cons = vec![x.expr().sum().eq_const(1.0), y.expr().sum().eq_const(1.0)];
    let p = SaddlePointProblem::new(MinimizeMaximize::new(f), cons);
    let r = p.solve(solver, &SaddleOptions::default(), &mut ValueStore::new());
    let r = expect_solved(r)?;
    let (xs, ys) = (value(&r, &x), value(&r, &y));
    let mut rep = DemoReport::new("matrix_game", "Matrix game C = [[1, 2], [3, 1]] over simplex x simplex", &["value"]);
    rep.row("game value", vec![num(r.value)]);
    rep.row("x*", vec![vec_str(&xs)]);
    rep.row("y*", vec![vec_str(&ys)]);
    rep.row("gap", vec![format!("{:.2e}", r.gap)]);
    let want = 5.0 / 3.0;
    rep.check("value", (r.value - want).abs() <= 1e-4, format!("{} vs 5/3", num(r.value)));
    rep.check(
        "strategies",
        (xs[0] - 2.0 / 3.0).abs() <= 1e-4 && (ys[0] - 1.0 / 3.0).abs() <= 1e-4,
        format!("x* = {}, y* = {}", vec_str(&xs), vec_str(&ys)),
    );
    rep.check("gap", r.gap <= 1e-6, format!("{:.2e}", r.gap));
    Ok(rep)
}

fn robust_lp(solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    let mut rep = DemoReport::new(
        "robust_lp",
        "Robust cost LP: minimize sup_{c in C} c'x over x in X",
        &["dualized", "vertex oracle"],
    );
    // fixed x on the unit box
    let x = VariableDecl::vector("x", 2);
    let c = local("c", Shape::Vector(2));
    let (rows, rhs) = box_rows(&[0.0, 0.0], &[1.0, 1.0]);
    let se = saddle_max(&inner(&x.expr(), &c.expr()).map_err(fail)?, &polytope_constraints(&c, &rows, &rhs)).map_err(fail)?;
    let x0 = [1.0, 2.0];
    let fixed = SaddleProblem::new(Objective::Minimize(se.clone()), vec![x.expr().equals(&Expr::vector(&x0))]);
    let r = solve_convex(&fixed, solver)?;
    let verts = polytope_vertices(&Matrix::from_row_vecs(&rows), &rhs);
    let oracle = verts.iter().map(|v| dot(v, &x0)).fold(f64::NEG_INFINITY, f64::max);
    rep.row("C = [0,1]^2, x = (1, 2)", vec![num(r.value), num(oracle)]);
    rep.check("unit box at x = (1, 2)", (r.value - 3.0).abs() <= 1e-6, format!("{} vs 3", num(r.value)));

    // optimized x with a cut box
    let (mut rows, mut rhs) = box_rows(&[0.5, 1.0, -0.5], &[2.0, 3.0, 1.0]);
    rows.push(vec![1.0, 1.0, 1.0]);
    rhs.push(4.0);
    let x = VariableDecl::vector("x", 3);
    let c = local("c", Shape::Vector(3));
    let se = saddle_max(&inner(&x.expr(), &c.expr()).map_err(fail)?, &polytope_constraints(&c, &rows, &rhs)).map_err(fail)?;
    let xset = vec![
        x.expr().ge_const(-1.0),
        x.expr().le_const(2.0),
        x.expr().sum().ge_const(1.0),
        (x.expr().at(0).unwrap() - x.expr().at(2).unwrap()).le_const(0.5),
    ];
    let p = SaddleProblem::new(Objective::Minimize(se), xset.clone());
    let r = solve_convex(&p, solver)?;
    // oracle: epigraph over the vertices, an ordinary LP
    let verts = polytope_vertices(&Matrix::from_row_vecs(&rows), &rhs);
    let t = VariableDecl::scalar("t");
    let mut cons = xset;
    for v in &verts {
        cons.push(Expr::vector(v).matmul(&x.expr()).unwrap().le(&t.expr()));
    }
    let lp = SaddleProblem::new(Objective::Minimize(t.expr()), cons);
    let o = solve_convex(&lp, solver)?;
    rep.row(&format!("cut box ({} vertices), optimized x", verts.len()), vec![num(r.value), num(o.value)]);
    rep.check("cut box", (r.value - o.value).abs() <= 1e-5, format!("{} vs {}", num(r.value), num(o.value)));
    Ok(rep)
}

fn robust_production(solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    // goods: two inputs we buy, two products we sell
    let p_nom = [1.0, 1.5, 2.2, 3.0];
    let radius = [0.2, 0.3, 0.4, 0.5];
    let lo: Vec<f64> = p_nom.iter().zip(&radius).map(|(p, r)| p - r).collect();
    let hi: Vec<f64> = p_nom.iter().zip(&radius).map(|(p, r)| p + r).collect();
    // total price shift is limited
    let (mut rows, mut rhs) = box_rows(&lo, &hi);
    rows.push(vec![1.0; 4]);
    rhs.push(p_nom.iter().sum::<f64>() + 0.6);
    rows.push(vec![-1.0; 4]);
    rhs.push(-p_nom.iter().sum::<f64>() + 0.6);

    let q = VariableDecl::vector("q", 4);
    let qset = vec![
        q.expr().ge_const(-2.0),
        q.expr().le_const(2.0),
        // products need inputs
        (q.expr().at(0).unwrap() + q.expr().at(1).unwrap()
            + 0.8 * q.expr().at(2).unwrap()
            + 0.6 * q.expr().at(3).unwrap())
        .ge_const(0.0),
    ];
    let phi = 0.5 * sum_squares(&q.expr()) + 0.1 * norm1(&q.expr());
    let p = local("p", Shape::Vector(4));
    let wc = saddle_max(&inner(&q.expr(), &p.expr()).map_err(fail)?, &polytope_constraints(&p, &rows, &rhs)).map_err(fail)?;

    let robust = SaddleProblem::new(Objective::Minimize(phi.clone() + wc.clone()), qset.clone());
    let r = solve_convex(&robust, solver)?;
    let nominal = SaddleProblem::new(
        Objective::Minimize(phi.clone() + Expr::vector(&p_nom).matmul(&q.expr()).unwrap()),
        qset,
    );
    let n = solve_convex(&nominal, solver)?;
    let (qr, qn) = (value(&r, &q), value(&n, &q));
    let phi_of = |x: &[f64]| 0.5 * dot(x, x) + 0.1 * x.iter().map(|v| v.abs()).sum::<f64>();
    let verts = polytope_vertices(&Matrix::from_row_vecs(&rows), &rhs);
    let worst = |x: &[f64]| verts.iter().map(|v| dot(v, x)).fold(f64::NEG_INFINITY, f64::max);

    let mut rep = DemoReport::new(
        "robust_production",
        "Robust production with worst case prices",
        &["Nominal plan", "Robust plan"],
    );
    rep.row("q", vec![vec_str(&qn), vec_str(&qr)]);
    rep.row("nominal cost", vec![num(phi_of(&qn) + dot(&p_nom, &qn)), num(phi_of(&qr) + dot(&p_nom, &qr))]);
    rep.row("worst case cost", vec![num(phi_of(&qn) + worst(&qn)), num(phi_of(&qr) + worst(&qr))]);
    rep.check(
        "value matches vertex oracle",
        (r.value - (phi_of(&qr) + worst(&qr))).abs() <= 1e-5,
        format!("{} vs {}", num(r.value), num(phi_of(&qr) + worst(&qr))),
    );
    rep.check(
        "robust plan has the smaller worst case",
        phi_of(&qr) + worst(&qr) <= phi_of(&qn) + worst(&qn) + 1e-6,
        format!("{} <= {}", num(phi_of(&qr) + worst(&qr)), num(phi_of(&qn) + worst(&qn))),
    );
    let wc_nom = eval_at(&wc, &[(&q, &qn)], solver)?;
    rep.check(
        "worst case of the nominal plan",
        (wc_nom - worst(&qn)).abs() <= 1e-5,
        format!("{} vs {}", num(wc_nom), num(worst(&qn))),
    );
    Ok(rep)
}

struct BondData {
    cash: Vec<Vec<f64>>,
    price: Vec<f64>,
    y_nom: Vec<f64>,
    h_mkt: Vec<f64>,
}

fn bond_data() -> BondData {
    let periods = 20;
    let maturities = [4, 8, 12, 16, 20];
    let coupons = [1.0, 1.5, 2.0, 2.25, 2.5];
    let y_nom: Vec<f64> = (1..=periods).map(|t| 0.015 + 0.01 * (1.0 - (-(t as f64) / 8.0).exp())).collect();
    let cash: Vec<Vec<f64>> = maturities
        .iter()
        .zip(coupons)
        .map(|(&m, c)| (1..=periods).map(|t| if t < m { c } else if t == m { c + 100.0 } else { 0.0 }).collect())
        .collect();
    let price: Vec<f64> = cash
        .iter()
        .map(|cf| cf.iter().enumerate().map(|(t, c)| c * (-((t + 1) as f64) * y_nom[t]).exp()).sum())
        .collect();
    // equal market value in each bond, 100 in total
    let h_mkt = price.iter().map(|p| 20.0 / p).collect();
    BondData { cash, price, y_nom, h_mkt }
}

fn robust_bond(solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    let d = bond_data();
    let (n, periods) = (d.cash.len(), d.y_nom.len());
    let (delta_max, kappa, omega, budget) = (0.01, 0.12, 2e-5, 100.0);
    let h = nonneg_vec("h", n);
    let delta = local("delta", Shape::Vector(periods));
    let y = delta.expr() + Expr::vector(&d.y_nom);
    let t: Vec<f64> = (1..=periods).map(|t| -(t as f64)).collect();
    let discount = exp(&y.multiply(&t).map_err(fail)?);
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(saddle_inner(&discount, &h.expr().at(i).unwrap().multiply(&d.cash[i]).map_err(fail)?).map_err(fail)?);
    }
    let value_fn = Expr::sum_of(&terms).map_err(fail)?;
    let dd = delta.expr().slice(1, periods).unwrap() - delta.expr().slice(0, periods - 1).unwrap();
    let yset = vec![
        norm_inf(&delta.expr()).le_const(delta_max),
        norm1(&delta.expr()).le_const(kappa),
        sum_squares(&dd).le_const(omega),
    ];
    let v_wc = saddle_min(&value_fn, &yset).map_err(fail)?;

    let wc_mkt = eval_at(&v_wc, &[(&h, &d.h_mkt)], solver)?;
    let mut short = vec![0.0; n];
    short[0] = budget / d.price[0];
    let wc_short = eval_at(&v_wc, &[(&h, &short)], solver)?;
    let v_lim = (wc_mkt + 0.5 * (wc_short - wc_mkt)).round();

    let pv: Vec<f64> = d.price.clone();
    let hp_mkt: Vec<f64> = d.h_mkt.iter().zip(&pv).map(|(a, b)| a * b).collect();
    let turnover = 0.5 * norm1(&(h.expr().multiply(&pv).unwrap() - Expr::vector(&hp_mkt)));
    let p = SaddleProblem::new(
        Objective::Minimize(turnover),
        vec![Expr::vector(&pv).matmul(&h.expr()).unwrap().eq_const(budget), v_wc.ge(&Expr::constant(v_lim))],
    );
    let r = solve_convex(&p, solver)?;
    let hs = value(&r, &h);
    let wc_rob = eval_at(&v_wc, &[(&h, &hs)], solver)?;
    let turnover_of =
        |x: &[f64]| 0.5 * x.iter().zip(&d.h_mkt).zip(&pv).map(|((a, b), p)| ((a - b) * p).abs()).sum::<f64>();

    let mut rep = DemoReport::new(
        "robust_bond_synthetic",
        &format!("Robust bond portfolio (synthetic, {n} bonds, {periods} periods, V_lim = {v_lim})"),
        &["Nominal portfolio", "Robust portfolio"],
    );
    rep.row("Turn-over distance", vec![format!("${:.2}", turnover_of(&d.h_mkt)), format!("${:.2}", r.value)]);
    rep.row("Worst-case value", vec![format!("${wc_mkt:.2}"), format!("${wc_rob:.2}")]);
    rep.check("nominal portfolio misses the limit", wc_mkt < v_lim, format!("{wc_mkt:.4} < {v_lim}"));
    // relative slack at the solver's accuracy
    rep.check(
        "robust portfolio meets the limit",
        wc_rob >= v_lim * (1.0 - 1e-6),
        format!("{wc_rob:.6} >= {v_lim} (relative tolerance 1e-6)"),
    );
    rep.check("budget", (dot(&pv, &hs) - budget).abs() <= 1e-6, format!("p'h = {:.6}", dot(&pv, &hs)));
    rep.check(
        "turn-over matches objective",
        (turnover_of(&hs) - r.value).abs() <= 1e-5,
        format!("{:.6} vs {:.6}", turnover_of(&hs), r.value),
    );
    Ok(rep)
}

fn sum_k_largest(v: &[f64], k: usize) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s[..k].iter().sum()
}

fn robust_weights(solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    let (m, n, k, eta) = (40usize, 3usize, 20usize, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth = [1.0, -2.0, 0.5];
    let mut a = Matrix::zeros(m, n);
    let mut labels = vec![0.0; m];
    for i in 0..m {
        let mut s = 0.3;
        for j in 0..n {
            let v: f64 = rng.gen_range(-1.0..1.0);
            a.set(i, j, v);
            s += truth[j] * v;
        }
        let flip = rng.gen_bool(0.05);
        labels[i] = if (s >= 0.0) != flip { 1.0 } else { -1.0 };
    }
    let theta = VariableDecl::vector("theta", n);
    let beta0 = VariableDecl::scalar("beta0");
    let w = nonneg_vec("w", m);
    let score = Expr::matrix(&a).matmul(&theta.expr()).unwrap() + beta0.expr();
    let loss = pos(&(1.0 - score.multiply(&labels).unwrap()));
    let reg = eta * sum_squares(&theta.expr());
    let f = saddle_inner(&loss, &w.expr()).map_err(fail)? + reg.clone();
    let cons = vec![w.expr().le_const(1.0), w.expr().sum().eq_const(k as f64)];
    let p = SaddlePointProblem::new(MinimizeMaximize::new(f), cons);
    let r = expect_solved(p.solve(solver, &SaddleOptions::default(), &mut ValueStore::new()))?;
    let nominal = SaddleProblem::new(Objective::Minimize((k as f64 / m as f64) * loss.sum() + reg), vec![]);
    let nr = solve_convex(&nominal, solver)?;

    let eval = |r: &SolveReport| {
        let th = value(r, &theta);
        let b0 = value(r, &beta0)[0];
        let s: Vec<f64> = (0..m).map(|i| (0..n).map(|j| a.get(i, j) * th[j]).sum::<f64>() + b0).collect();
        let losses: Vec<f64> = s.iter().zip(&labels).map(|(s, y)| (1.0 - y * s).max(0.0)).collect();
        let acc = s.iter().zip(&labels).filter(|(s, y)| (**s >= 0.0) == (**y > 0.0)).count() as f64 / m as f64;
        let reg = eta * dot(&th, &th);
        (acc, sum_k_largest(&losses, k) + reg, (k as f64 / m as f64) * losses.iter().sum::<f64>() + reg)
    };
    let (acc_n, wc_n, avg_n) = eval(&nr);
    let (acc_r, wc_r, avg_r) = eval(&r);
    let mut rep = DemoReport::new(
        "robust_weights_synthetic",
        &format!("Model fitting robust to data weights (synthetic, m = {m}, k = {k})"),
        &["Nominal classifier", "Robust classifier"],
    );
    rep.row("Train accuracy", vec![format!("{:.1}%", 100.0 * acc_n), format!("{:.1}%", 100.0 * acc_r)]);
    rep.row("Uniform-weight objective", vec![num(avg_n), num(avg_r)]);
    rep.row("Worst-case objective", vec![num(wc_n), num(wc_r)]);
    rep.check(
        "saddle value equals sum of k largest losses plus regularizer",
        (r.value - wc_r).abs() <= 1e-5,
        format!("{} vs {}", num(r.value), num(wc_r)),
    );
    rep.check("robust classifier has the smaller worst case", wc_r <= wc_n + 1e-6, format!("{} <= {}", num(wc_r), num(wc_n)));
    rep.check("gap", r.gap <= 1e-6, format!("{:.2e}", r.gap));
    Ok(rep)
}

/// Synthetic three-asset instance.
pub struct MarkowitzData {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    pub rho: f64,
    pub eta: f64,
    pub gamma: f64,
}

pub fn markowitz_data() -> MarkowitzData {
    MarkowitzData {
        mu: vec![0.06, 0.09, 0.13],
        sigma: Matrix::from_rows(&[&[0.04, 0.006, 0.012], &[0.006, 0.09, 0.018], &[0.012, 0.018, 0.16]]),
        rho: 0.02,
        eta: 0.2,
        gamma: 1.0,
    }
}

/// Worst case risk adjusted return in closed form:
/// `μ'w - γ w'Σw - ρ‖w‖₁ - γη (Σᵢ Σᵢᵢ^{1/2} |wᵢ|)²`.
pub fn markowitz_worst_case(d: &MarkowitzData, w: &[f64]) -> f64 {
    let n = w.len();
    let quad: f64 = (0..n).map(|i| (0..n).map(|j| w[i] * d.sigma.get(i, j) * w[j]).sum::<f64>()).sum();
    let l1: f64 = (0..n).map(|i| d.sigma.get(i, i).sqrt() * w[i].abs()).sum();
    dot(&d.mu, w) - d.gamma * quad - d.rho * w.iter().map(|v| v.abs()).sum::<f64>() - d.gamma * d.eta * l1 * l1
}

/// The saddle min `inf_{(μ, Σ) ∈ U} μ'w - γ w'Σw` and its weight variable.
pub fn markowitz_worst_case_expr(d: &MarkowitzData) -> (Expr, VariableDecl) {
    let n = d.mu.len();
    let w = nonneg_vec("w", n);
    let delta = local("delta_loc", Shape::Vector(n));
    let sig_p = VariableDecl::new("Sigma_perturbed", Shape::Matrix(n, n), VarAttrs { psd: true, local: true, ..VarAttrs::NONE }).unwrap();
    let big_delta = local("Delta_loc", Shape::Matrix(n, n));
    let f = Expr::vector(&d.mu).matmul(&w.expr()).unwrap() + saddle_inner(&delta.expr(), &w.expr()).unwrap()
        - d.gamma * saddle_quad_form(&w.expr(), &sig_p.expr()).unwrap();
    let mut bound = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            bound.set(i, j, d.eta * (d.sigma.get(i, i) * d.sigma.get(j, j)).sqrt());
        }
    }
    let cons = vec![
        abs(&delta.expr()).le_const(d.rho),
        sig_p.expr().equals(&(Expr::matrix(&d.sigma) + big_delta.expr())),
        abs(&big_delta.expr()).le(&Expr::matrix(&bound)),
    ];
    (saddle_min(&f, &cons).expect("robust Markowitz saddle min is compliant"), w)
}

fn robust_markowitz(solver: &dyn ConeSolver) -> Result<DemoReport, DemoError> {
    if !solver.supports_psd() {
        return Err(DemoError::Capability(format!(
            "robust_markowitz needs PSD cones, which backend `{}` does not support",
            solver.name()
        )));
    }
    let d = markowitz_data();
    let (g, w) = markowitz_worst_case_expr(&d);
    let budget = vec![w.expr().sum().eq_const(1.0)];
    let robust = SaddleProblem::new(Objective::Maximize(g.clone()), budget.clone());
    let r = solve_convex(&robust, solver)?;
    let nominal_obj = Expr::vector(&d.mu).matmul(&w.expr()).unwrap()
        - d.gamma * saddlecomp_core::atoms::sum_squares(&Expr::matrix(&sigma_sqrt(&d.sigma)).matmul(&w.expr()).unwrap());
    let nominal = SaddleProblem::new(Objective::Maximize(nominal_obj), budget);
    let nr = solve_convex(&nominal, solver)?;
    let (wr, wn) = (value(&r, &w), value(&nr, &w));
    let nom = |x: &[f64]| {
        let n = x.len();
        dot(&d.mu, x) - d.gamma * (0..n).map(|i| (0..n).map(|j| x[i] * d.sigma.get(i, j) * x[j]).sum::<f64>()).sum::<f64>()
    };
    let mut rep = DemoReport::new(
        "robust_markowitz",
        "Robust Markowitz portfolio (synthetic, 3 assets)",
        &["Nominal portfolio", "Robust portfolio"],
    );
    rep.row("weights", vec![vec_str(&wn), vec_str(&wr)]);
    rep.row("Nominal objective", vec![format!("{:.4}", nom(&wn)), format!("{:.4}", nom(&wr))]);
    rep.row(
        "Robust objective",
        vec![format!("{:.4}", markowitz_worst_case(&d, &wn)), format!("{:.4}", markowitz_worst_case(&d, &wr))],
    );
    let want = markowitz_worst_case(&d, &wr);
    rep.check("robust value matches closed form", (r.value - want).abs() <= 1e-5, format!("{:.7} vs {want:.7}", r.value));
    rep.check(
        "robust portfolio has the larger worst case",
        markowitz_worst_case(&d, &wr) >= markowitz_worst_case(&d, &wn) - 1e-6,
        format!("{:.6} >= {:.6}", markowitz_worst_case(&d, &wr), markowitz_worst_case(&d, &wn)),
    );
    rep.check(
        "nominal portfolio has the larger nominal objective",
        nom(&wn) >= nom(&wr) - 1e-6,
        format!("{:.6} >= {:.6}", nom(&wn), nom(&wr)),
    );
    Ok(rep)
}

/// Symmetric square root through the eigendecomposition.
fn sigma_sqrt(s: &Matrix) -> Matrix {
    let (vals, vecs) = saddlecomp_core::linalg::sym_eigen(s);
    let n = s.rows;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| vecs.get(i, k) * vals[k].max(0.0).sqrt() * vecs.get(j, k)).sum();
            out.set(i, j, v);
        }
    }
    out
}
