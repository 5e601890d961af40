use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use optosteer_cli::{run, Cli, CliError, EXIT_CHECK_FAILED};

fn write_out(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match run(&cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    let printed = match cli.command.out() {
        Some(path) => {
            if let Err(e) = write_out(path, &out.csv) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            stdout.write_all(out.report.as_bytes())
        }
        None if out.table => {
            eprint!("{}", out.report);
            stdout.write_all(out.csv.as_bytes())
        }
        None => stdout.write_all(out.report.as_bytes()),
    };
    if let Err(e) = printed.and_then(|_| stdout.flush()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    if !out.failed_checks.is_empty() {
        for f in &out.failed_checks {
            eprintln!("check failed: {f}");
        }
        return ExitCode::from(EXIT_CHECK_FAILED as u8);
    }
    ExitCode::SUCCESS
}
