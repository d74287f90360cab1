//! Command implementations. Each returns the process exit code and writes
//! human-readable output to `out`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use saddlecomp_core::dsp;
use saddlecomp_core::{ConeSolver, ReportStatus, SolveReport, ValueStore};

use crate::demos;
use crate::problem_file::{self, FileProblem, ParseError, ProblemSpec};
use crate::program_file;
use crate::report::{sha256_hex, JsonReport, RunRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_DSP: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GAP: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Default run log; `SADDLECOMP_RUNLOG` overrides it.
pub fn default_log_path() -> PathBuf {
    std::env::var_os("SADDLECOMP_RUNLOG").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("saddlecomp-runs.jsonl"))
}

fn read(path: &Path, out: &mut dyn Write) -> Option<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(out, "error: cannot read {}: {e}", path.display());
            None
        }
    }
}

fn report_parse_error(e: &ParseError, path: &Path, out: &mut dyn Write) -> i32 {
    if e.is_compliance() {
        let _ = writeln!(out, "not DSP-compliant");
        for d in &e.diagnostics {
            let _ = writeln!(out, "  {}: {} ({})", d.code, d.message, e.location);
        }
        EXIT_NOT_DSP
    } else {
        let _ = writeln!(out, "parse error in {} at {}: {}", path.display(), e.location, e.message);
        EXIT_USAGE
    }
}

fn load(path: &Path, out: &mut dyn Write) -> Result<(String, ProblemSpec), i32> {
    let text = read(path, out).ok_or(EXIT_USAGE)?;
    match problem_file::parse(&text) {
        Ok(spec) => Ok((text, spec)),
        Err(e) => Err(report_parse_error(&e, path, out)),
    }
}

fn names(vars: &[saddlecomp_core::VariableDecl]) -> String {
    let n: Vec<&str> = vars.iter().map(|v| v.name()).collect();
    format!("[{}]", n.join(", "))
}

/// `check <file>`
pub fn check(path: &Path, out: &mut dyn Write) -> i32 {
    let (_, spec) = match load(path, out) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let (ok, diags, summary) = match &spec.problem {
        FileProblem::Saddle(p) => match p.infer_roles() {
            Ok(roles) => {
                (true, Vec::new(), format!("convex: {}; concave: {}", names(&roles.convex_vars), names(&roles.concave_vars)))
            }
            Err(d) => {
                let (parts, _) = dsp::analyze_roles(&p.objective.expr);
                (false, d, format!("convex: {}; concave: {}", names(&parts.convex_vars), names(&parts.concave_vars)))
            }
        },
        FileProblem::Convex(p) => {
            let d = p.diagnostics();
            (d.is_empty(), d, format!("variables: {}", names(&spec.variables.iter().filter(|v| !v.is_local()).cloned().collect::<Vec<_>>())))
        }
    };
    if ok {
        let _ = writeln!(out, "DSP-compliant; {summary}");
        EXIT_OK
    } else {
        let _ = writeln!(out, "not DSP-compliant; {summary}");
        for d in &diags {
            let _ = writeln!(out, "  {d}");
        }
        EXIT_NOT_DSP
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveArgs {
    pub tol: Option<f64>,
    pub json: bool,
    pub log: Option<PathBuf>,
}

fn fmt_values(x: &[f64]) -> String {
    if x.len() == 1 {
        return format!("{:.7}", x[0]);
    }
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.7}")).collect();
    format!("[{}]", parts.join(", "))
}

fn exit_for(r: &SolveReport) -> i32 {
    match r.status {
        ReportStatus::Solved => EXIT_OK,
        ReportStatus::NotDSP => EXIT_NOT_DSP,
        ReportStatus::GapTooLarge => EXIT_GAP,
        ReportStatus::SolverFailure => EXIT_SOLVER,
    }
}

/// `solve <file> [--tol T] [--json]`. Raw cone program files written by
/// `dualize` are accepted too.
pub fn solve(path: &Path, args: &SolveArgs, solver: &dyn ConeSolver, out: &mut dyn Write) -> i32 {
    let Some(text) = read(path, out) else { return EXIT_USAGE };
    let hash = sha256_hex(text.as_bytes());
    let log = args.log.clone().unwrap_or_else(default_log_path);
    let start = Instant::now();
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
        if program_file::looks_like_program(&v) {
            return solve_program(&text, &hash, &log, solver, out);
        }
    }
    let spec = match problem_file::parse(&text) {
        Ok(s) => s,
        Err(e) => return report_parse_error(&e, path, out),
    };
    let mut opts = spec.options;
    if let Some(t) = args.tol {
        opts.tol = t;
    }
    let mut store = ValueStore::new();
    let report = match &spec.problem {
        FileProblem::Saddle(p) => p.solve(solver, &opts, &mut store),
        FileProblem::Convex(p) => p.solve(solver, &opts.solver, &mut store),
    };
    let wall = start.elapsed().as_secs_f64();
    let record = RunRecord::new(hash.clone(), report.status.as_str(), report.value, report.gap, wall);
    if let Err(e) = record.append_to(&log) {
        let _ = writeln!(out, "warning: cannot write run log {}: {e}", log.display());
    }
    if args.json {
        let j = JsonReport::new(hash, &report, &spec.variables);
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&j).expect("report serializes"));
        return exit_for(&report);
    }
    let _ = writeln!(out, "status: {}", report.status.as_str());
    match report.status {
        ReportStatus::Solved => {
            let _ = writeln!(out, "value: {:.7}", report.value);
            if let FileProblem::Saddle(_) = spec.problem {
                let _ = writeln!(out, "gap: {:.3e} (tolerance {:.1e})", report.gap, report.tolerance);
            }
            for v in &spec.variables {
                if let Some(x) = report.value_of(v) {
                    let _ = writeln!(out, "{} = {}", v.name(), fmt_values(x));
                }
            }
            if !report.message.is_empty() {
                let _ = writeln!(out, "note: {}", report.message);
            }
        }
        ReportStatus::GapTooLarge => {
            let _ = writeln!(
                out,
                "min-max value: {:.9}\nmax-min value: {:.9}\n{}",
                report.v_plus.unwrap_or(f64::NAN),
                -report.v_minus.unwrap_or(f64::NAN),
                report.message
            );
        }
        ReportStatus::NotDSP => {
            for d in &report.diagnostics {
                let _ = writeln!(out, "  {d}");
            }
            if report.diagnostics.is_empty() {
                let _ = writeln!(out, "  {}", report.message);
            }
        }
        ReportStatus::SolverFailure => {
            let _ = writeln!(out, "{}", report.message);
        }
    }
    exit_for(&report)
}

fn solve_program(text: &str, hash: &str, log: &Path, solver: &dyn ConeSolver, out: &mut dyn Write) -> i32 {
    let start = Instant::now();
    let pf = match program_file::from_json(text) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(out, "parse error: {e}");
            return EXIT_USAGE;
        }
    };
    let opts = saddlecomp_core::SolverOptions::default();
    let sol = match saddlecomp_core::cone::solve_cone(solver, &pf.program, &opts) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "status: SolverFailure\n{e}");
            return EXIT_SOLVER;
        }
    };
    let ok = sol.status == saddlecomp_core::SolveStatus::Optimal;
    let value = if ok { pf.value(pf.program.objective_value(&sol.primal)) } else { f64::NAN };
    let status = if ok { "Solved" } else { "SolverFailure" };
    let record = RunRecord::new(hash.into(), status, value, 0.0, start.elapsed().as_secs_f64());
    let _ = record.append_to(log);
    let _ = writeln!(out, "status: {status}");
    if ok {
        let _ = writeln!(out, "value: {value:.10}");
        EXIT_OK
    } else {
        let _ = writeln!(out, "solver status: {}", sol.status.as_str());
        EXIT_SOLVER
    }
}

/// `dualize <file> --out <file>`
pub fn dualize(path: &Path, out_path: &Path, out: &mut dyn Write) -> i32 {
    let (_, spec) = match load(path, out) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let (program, maximize) = match &spec.problem {
        FileProblem::Saddle(p) => match p.programs() {
            Ok(progs) => (progs.plus.program, false),
            Err(e) => return not_dsp(e, out),
        },
        FileProblem::Convex(p) => match p.lower() {
            Ok(l) => {
                let maximize = matches!(l.sense, saddlecomp_core::canon::Sense::Maximize);
                (l.program, maximize)
            }
            Err(e) => return not_dsp(e, out),
        },
    };
    let text = program_file::to_json(&program, maximize);
    if let Err(e) = std::fs::write(out_path, text) {
        let _ = writeln!(out, "error: cannot write {}: {e}", out_path.display());
        return EXIT_USAGE;
    }
    let _ = writeln!(
        out,
        "wrote {}: {} variables, {} rows, {} nonzeros\ncones: {}",
        out_path.display(),
        program.num_vars(),
        program.num_rows(),
        program.a.nnz(),
        program_file::inventory(&program)
    );
    EXIT_OK
}

fn not_dsp(e: saddlecomp_core::ProblemError, out: &mut dyn Write) -> i32 {
    match e {
        saddlecomp_core::ProblemError::NotDsp(d) => {
            let _ = writeln!(out, "not DSP-compliant");
            for x in &d {
                let _ = writeln!(out, "  {x}");
            }
            EXIT_NOT_DSP
        }
        other => {
            let _ = writeln!(out, "error: {other}");
            EXIT_NOT_DSP
        }
    }
}

/// `demo <name>`
pub fn demo(name: &str, solver: &dyn ConeSolver, out: &mut dyn Write) -> i32 {
    match demos::run(name, solver) {
        Ok(rep) => {
            let _ = write!(out, "{rep}");
            if rep.passed() {
                EXIT_OK
            } else {
                EXIT_SOLVER
            }
        }
        Err(e @ demos::DemoError::UnknownDemo(_)) => {
            let _ = writeln!(out, "error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            EXIT_SOLVER
        }
    }
}
