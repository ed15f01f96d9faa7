use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use epinp_cli::{run, CliError, Command, RunConfig};

/// Simulate SIR epidemics and fit constant or Gaussian-process infection
/// rates to removal data.
#[derive(Parser, Debug)]
#[command(name = "epinp", version)]
struct Args {
    /// simulate, fit-parametric, fit-discrete-gp, fit-cts-gp, ml-estimate or
    /// summarize
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Overrides mcmc.seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Extra key=value settings; later ones win.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(args: &Args) -> anyhow::Result<()> {
    let command: Command = args.command.parse()?;
    let mut config = RunConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    for o in &args.overrides {
        config.set_override(o)?;
    }
    if let Some(seed) = args.seed {
        config.set("mcmc.seed", &seed.to_string());
    }
    for path in run(command, &config, &args.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<CliError>())
                .map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
