//! Saddle problem modeling on top of `saddlecomp-core`: the Clarabel
//! backend, problem files, cone program files and the demo corpus.

pub mod backend;

pub use saddlecomp_core as core;
pub mod problem_file;
pub mod program_file;
pub mod demos;
pub mod report;
pub mod cli;
