use std::process::ExitCode;

use clap::Parser;
use crooks_lab::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for w in &report.outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.manifest.files {
                println!("{}  {}", f.sha256, report.out_dir.join(&f.path).display());
            }
            match &report.outcome.failure {
                Some(msg) => {
                    eprintln!("error: numerical failure: {msg}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
