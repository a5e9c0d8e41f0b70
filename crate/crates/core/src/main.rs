use std::process::ExitCode;

use clap::Parser;
use rcm_align::cli::{run, Cli, SEED_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    match run(&cli, env_seed.as_deref()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {:#}", anyhow::Error::from(e));
            ExitCode::from(2)
        }
    }
}
