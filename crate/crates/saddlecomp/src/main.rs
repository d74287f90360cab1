use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use saddlecomp::{backend, cli};

#[derive(Parser)]
#[command(name = "saddlecomp", version, about = "Check, dualize and solve saddle problems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report compliance, variable roles and diagnostics.
    Check { file: PathBuf },
    /// Solve a problem file (or a cone program written by `dualize`).
    Solve {
        file: PathBuf,
        /// Relative duality gap tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Emit a machine-readable report.
        #[arg(long)]
        json: bool,
        /// Run log to append to.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write the dualized cone program as JSON.
    Dualize {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in demo.
    Demo { name: String },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { cli::EXIT_USAGE } else { cli::EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let needs_solver = matches!(args.command, Command::Solve { .. } | Command::Demo { .. });
    let solver = if needs_solver {
        match backend::from_env() {
            Ok(s) => Some(s),
            Err(e) => {
                let _ = writeln!(out, "error: {e}");
                return ExitCode::from(cli::EXIT_USAGE as u8);
            }
        }
    } else {
        None
    };
    let code = match args.command {
        Command::Check { file } => cli::check(&file, &mut out),
        Command::Solve { file, tol, json, log } => {
            cli::solve(&file, &cli::SolveArgs { tol, json, log }, solver.as_deref().unwrap(), &mut out)
        }
        Command::Dualize { file, out: dest } => cli::dualize(&file, &dest, &mut out),
        Command::Demo { name } => cli::demo(&name, solver.as_deref().unwrap(), &mut out),
    };
    ExitCode::from(code as u8)
}
