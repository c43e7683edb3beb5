use std::process::ExitCode;

use clap::Parser;
use combscatter::cli::{error_json, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(Some(cli.command.name()), &e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
