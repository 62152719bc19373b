mod commands;
mod input;
mod output;

use std::process::ExitCode;

use clap::Parser;

use wcc_core::WccError;

use crate::commands::Cli;

/// Exit code for an error: 2 for bad input, 3 for infeasible or incomplete requests.
fn exit_code(e: &WccError) -> u8 {
    match e {
        WccError::Parameter(_) | WccError::Precondition(_) | WccError::Json(_) => 2,
        WccError::Feasibility { .. } | WccError::Completeness(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("wcc: could not configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("wcc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
