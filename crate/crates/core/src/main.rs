//! `mmtwin` command-line driver.

mod cli;

use std::process::ExitCode;

use clap::Parser;

use cli::{run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind, message) = match &err {
                CliError::Usage(m) => (2, "usage", m.clone()),
                CliError::Run(e) => (1, e.kind(), e.to_string()),
            };
            let record = serde_json::json!({ "command": command, "error": kind, "message": message });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
