//! Clarabel adapter for the cone solver contract.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use saddlecomp_core::cone::SolverError;
use saddlecomp_core::{ConeKind, ConeProgram, ConeSolver, Solution, SolveStatus, SolverOptions};

/// Interior point backend. `psd` can be switched off to emulate a backend
/// without semidefinite support.
#[derive(Clone, Debug)]
pub struct Clarabel {
    psd: bool,
}

impl Default for Clarabel {
    fn default() -> Self {
        Clarabel { psd: cfg!(feature = "psd") }
    }
}

impl Clarabel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Same backend, PSD capability withheld.
    pub fn without_psd() -> Self {
        Clarabel { psd: false }
    }
}

/// One output row: a signed, scaled copy of an input row.
#[derive(Clone, Copy)]
struct RowMap {
    src: usize,
    scale: f64,
}

fn map_rows(p: &ConeProgram) -> Result<(Vec<RowMap>, Vec<SupportedConeT<f64>>), SolverError> {
    let mut maps = Vec::with_capacity(p.num_rows());
    let mut cones = Vec::with_capacity(p.cones.len());
    let mut r = 0;
    for k in &p.cones {
        let len = k.len();
        match k.kind {
            ConeKind::Free => {}
            ConeKind::Zero => cones.push(SupportedConeT::ZeroConeT(len)),
            ConeKind::NonNeg => cones.push(SupportedConeT::NonnegativeConeT(len)),
            ConeKind::SecondOrder => cones.push(SupportedConeT::SecondOrderConeT(len)),
            ConeKind::Exponential => cones.push(SupportedConeT::ExponentialConeT()),
            ConeKind::DualExponential => cones.push(SupportedConeT::ExponentialConeT()),
            ConeKind::PsdTriangle => {
                #[cfg(feature = "psd")]
                cones.push(SupportedConeT::PSDTriangleConeT(k.dim));
                #[cfg(not(feature = "psd"))]
                return Err(SolverError::Capability { backend: "clarabel".into(), capability: "PSD" });
            }
        }
        match k.kind {
            ConeKind::Free => {}
            // (u, v, w) in the dual exponential cone iff (-v, -u, e·w) is in
            // the exponential cone
            ConeKind::DualExponential => {
                maps.push(RowMap { src: r + 1, scale: -1.0 });
                maps.push(RowMap { src: r, scale: -1.0 });
                maps.push(RowMap { src: r + 2, scale: std::f64::consts::E });
            }
            _ => maps.extend((r..r + len).map(|src| RowMap { src, scale: 1.0 })),
        }
        r += len;
    }
    Ok((maps, cones))
}

fn status_of(s: SolverStatus) -> SolveStatus {
    match s {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalError,
    }
}

impl ConeSolver for Clarabel {
    fn name(&self) -> &str {
        if self.psd {
            "clarabel"
        } else {
            "clarabel-nopsd"
        }
    }

    fn supports_psd(&self) -> bool {
        self.psd
    }

    fn thread_safe(&self) -> bool {
        true
    }

    fn solve(&self, p: &ConeProgram, opts: &SolverOptions) -> Result<Solution, SolverError> {
        let n = p.num_vars();
        let (maps, cones) = map_rows(p)?;
        let mut inverse: Vec<Option<(usize, f64)>> = vec![None; p.num_rows()];
        for (i, m) in maps.iter().enumerate() {
            inverse[m.src] = Some((i, m.scale));
        }
        let mut rows = Vec::with_capacity(p.a.nnz());
        let mut cols = Vec::with_capacity(p.a.nnz());
        let mut vals = Vec::with_capacity(p.a.nnz());
        for k in 0..p.a.nnz() {
            if let Some((i, s)) = inverse[p.a.rows[k]] {
                rows.push(i);
                cols.push(p.a.cols[k]);
                vals.push(p.a.vals[k] * s);
            }
        }
        let b: Vec<f64> = maps.iter().map(|m| p.b[m.src] * m.scale).collect();
        let a = saddlecomp_core::cone::Triplets { rows, cols, vals, shape: (maps.len(), n) };
        let (colptr, rowval, nzval) = a.to_csc();
        let a = CscMatrix::new(maps.len(), n, colptr, rowval, nzval);
        let pmat = CscMatrix::zeros((n, n));
        let settings = DefaultSettings {
            verbose: opts.verbose,
            max_iter: opts.max_iter,
            tol_feas: opts.tol_feas,
            tol_gap_abs: opts.tol_gap_abs,
            tol_gap_rel: opts.tol_gap_rel,
            presolve_enable: false,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&pmat, &p.c, &a, &b, &cones, settings)
            .map_err(|e| SolverError::Backend(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let status = status_of(sol.status);
        // duals back in the original row space: y = Tᵀ z, free rows get 0
        let mut dual = vec![0.0; p.num_rows()];
        for (i, m) in maps.iter().enumerate() {
            dual[m.src] += m.scale * sol.z[i];
        }
        let primal = sol.x.clone();
        let obj = if status == SolveStatus::Optimal { p.c.iter().zip(&primal).map(|(c, x)| c * x).sum() } else { f64::NAN };
        Ok(Solution { status, primal, dual, obj })
    }
}

/// Backend selected by `SADDLECOMP_BACKEND` (`clarabel` when unset,
/// `clarabel-nopsd` for the same solver without PSD support).
pub fn from_env() -> Result<Box<dyn ConeSolver>, String> {
    let name = std::env::var("SADDLECOMP_BACKEND").unwrap_or_default();
    by_name(&name)
}

pub fn by_name(name: &str) -> Result<Box<dyn ConeSolver>, String> {
    match name {
        "" | "clarabel" => Ok(Box::new(Clarabel::new())),
        "clarabel-nopsd" => Ok(Box::new(Clarabel::without_psd())),
        other => Err(format!("unknown backend `{other}` (available: clarabel, clarabel-nopsd)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use saddlecomp_core::affine::Affine;
    use saddlecomp_core::cone::ConeRows;
    use saddlecomp_core::Cone;

    #[test]
    fn row_maps() {
        let cols: Vec<Affine> = (0..3).map(Affine::column).collect();
        let blocks = vec![
            ConeRows::new(Cone::free(2), cols[..2].to_vec()),
            ConeRows::new(Cone::dual_exp(), cols.clone()),
            ConeRows::nonneg(vec![cols[0].clone()]),
        ];
        let p = ConeProgram::from_rows(&Affine::zero(), &blocks, 3, Vec::new());
        let (maps, cones) = map_rows(&p).unwrap();
        // free rows vanish, the dual exponential block is permuted and scaled
        let got: Vec<(usize, f64)> = maps.iter().map(|m| (m.src, m.scale)).collect();
        assert_eq!(got, vec![(3, -1.0), (2, -1.0), (4, std::f64::consts::E), (5, 1.0)]);
        assert_eq!(cones.len(), 2);
    }

    #[test]
    fn statuses() {
        assert_eq!(status_of(SolverStatus::AlmostSolved), SolveStatus::Optimal);
        assert_eq!(status_of(SolverStatus::PrimalInfeasible), SolveStatus::Infeasible);
        assert_eq!(status_of(SolverStatus::DualInfeasible), SolveStatus::Unbounded);
        assert_eq!(status_of(SolverStatus::MaxIterations), SolveStatus::NumericalError);
    }
}
