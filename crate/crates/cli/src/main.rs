use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod output;

use args::Cli;
use commands::{runtime, Failure};

fn execute(cli: &Cli) -> Result<bool, Failure> {
    match cli.common.threads {
        Some(n) => {
            let pool = rayon_pool(n)?;
            pool.install(|| commands::run(&cli.command, &cli.common))
        }
        None => commands::run(&cli.command, &cli.common),
    }
}

fn rayon_pool(threads: usize) -> Result<swpe_core::engine::ThreadPool, Failure> {
    swpe_core::engine::thread_pool(threads).map_err(runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
