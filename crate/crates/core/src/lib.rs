//! Disciplined saddle programming.
//!
//! This crate builds convex-concave saddle functions out of a small atom
//! library, checks them against the saddle calculus (conic combination,
//! affine pre-composition and monotone pre-composition), and turns saddle
//! extremum functions into ordinary cone programs by conic dualization.
//!
//! The crate is `no_std` (it needs `alloc`). Solving is delegated to a
//! [`ConeSolver`](cone::ConeSolver) implementation supplied by the caller; the
//! `saddlecomp` crate wires a Clarabel-backed one.
//!
//! Layout:
//!
//! - [`expr`]: expression trees, curvature and sign analysis, evaluation.
//! - [`atoms`]: the DCP atom subset and the saddle atoms.
//! - [`dsp`]: compliance checking and variable role classification.
//! - [`cone`]: cones, standard-form cone programs and the solver contract.
//! - [`canon`]: graph-form lowering of DCP expressions into cone rows.
//! - [`dualize`]: saddle conic forms, set representations and dualization.
//! - [`problem`]: saddle point problems, saddle extremum functions and
//!   saddle problems.

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod affine;
pub mod atoms;
pub mod canon;
pub mod cone;
pub mod dsp;
pub mod dualize;
pub mod expr;
pub mod linalg;
pub mod problem;

pub use atoms::{
    inner, quasidef_quad_form, saddle_inner, saddle_quad_form, weighted_log_sum_exp,
    weighted_norm2,
};
pub use cone::{Cone, ConeKind, ConeProgram, ConeSolver, Solution, SolveStatus, SolverOptions};
pub use dsp::{Diagnostic, DiagnosticCode, RolePartition};
pub use expr::{Constraint, Curvature, Expr, Matrix, Shape, Sign, VarAttrs, VariableDecl};
pub use problem::{
    saddle_max, saddle_min, MinimizeMaximize, Objective, ProblemError, ReportStatus, SaddleOptions, SaddlePointProblem,
    SaddleProblem, SolveReport, ValueStore,
};
