//! `sflr` command-line front end.

mod commands;
mod config;

use clap::Parser;
use config::Cli;
use std::process::ExitCode;

/// Exit status for a failed run: 2 configuration, 3 data, 4 numerical.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<config::ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<sflr::Error>() {
        Some(e) if e.is_config_error() => 2,
        Some(e) if e.is_data_error() => 3,
        Some(_) => 4,
        None => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                3
            } else {
                4
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            let json = serde_json::json!({ "error": chain.join(": "), "exit_code": code });
            eprintln!("{json}");
            ExitCode::from(code)
        }
    }
}
