use std::process::ExitCode;

use clap::Parser;
use slope_newt_cli::args::{Cli, Command};
use slope_newt_cli::commands::{cmd_path, cmd_solve, thread_cap, Outcome};

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    if let Some(n) = thread_cap()? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Path(a) => cmd_path(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Converged) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            log::warn!("solver did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
