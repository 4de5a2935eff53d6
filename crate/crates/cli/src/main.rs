use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use lcqft_cli::config::{Cli, Command, RunConfig};
use lcqft_cli::report::Status;

fn write_out(path: Option<&Path>, json: &str) -> Result<(), String> {
    match path {
        None => Ok(()),
        Some(p) if p.as_os_str() == "-" => std::io::stdout().write_all(json.as_bytes()).map_err(|e| e.to_string()),
        Some(p) => std::fs::write(p, json).map_err(|e| format!("{}: {e}", p.display())),
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
    let (common, suites) = match &cli.command {
        Command::Verify { which, suite, common } => (common, which.or(*suite).into_iter().collect::<Vec<_>>()),
        Command::Classify { common } => (common, vec![lcqft_cli::config::Suite::Classify]),
    };
    let cfg = match RunConfig::from_args(common, &suites) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let to_stdout = cfg.out.as_deref().is_some_and(|p| p.as_os_str() == "-");
    let (json, passed) = match &cli.command {
        Command::Verify { .. } => match lcqft_cli::run_suite(&cfg) {
            Ok(report) => {
                if !to_stdout {
                    print!("{}", report.summary());
                }
                (report.to_json(), report.passed())
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        Command::Classify { .. } => match lcqft_cli::run_classify(&cfg) {
            Ok(Ok(out)) => {
                if !to_stdout {
                    let c = &out.classification;
                    println!("dimension {} (expected {}), match = {}", c.dimension, c.expected, c.matched);
                }
                (out.to_json(), out.status == Status::Pass)
            }
            Ok(Err(e)) => {
                eprintln!("classification failed: {e}");
                return ExitCode::from(1);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    if let Err(e) = write_out(cfg.out.as_deref(), &json) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if passed { ExitCode::SUCCESS } else { ExitCode::from(1) }
}
