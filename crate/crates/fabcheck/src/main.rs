use std::io;
use std::process::ExitCode;

use clap::Parser;
use fabcheck::cli::{self, Cli, EXIT_ERROR};

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap exits with 2 on usage errors, which would read as "severe flags"
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match cli::run(&parsed, &mut io::stdout().lock()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fabcheck: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
