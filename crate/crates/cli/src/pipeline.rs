//! Subcommand execution: reads the config, runs the selected model and writes
//! its artifacts.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use epinp::chain::{ChainOutput, FunctionTrace, McmcSettings};
use epinp::cts::{attach_reporting_grid, run_cts_gp_mcmc, CtsConfig};
use epinp::discrete::{ml_daily_estimate, run_discrete_gp_mcmc, BetaPrior, DiscreteGpConfig};
use epinp::epi::{
    simulate_continuous, simulate_discrete, InfectiousPeriodModel, RateFunction, RemovalData,
    TimeScale,
};
use epinp::gp::KernelParams;
use epinp::parametric::{run_parametric_mcmc, GammaPrior, ParametricPriors};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::summary::{summarize_samples, summarize_scalar, summarize_trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    FitParametric,
    FitDiscreteGp,
    FitCtsGp,
    MlEstimate,
    Summarize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitParametric => "fit-parametric",
            Command::FitDiscreteGp => "fit-discrete-gp",
            Command::FitCtsGp => "fit-cts-gp",
            Command::MlEstimate => "ml-estimate",
            Command::Summarize => "summarize",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Command::Simulate,
            Command::FitParametric,
            Command::FitDiscreteGp,
            Command::FitCtsGp,
            Command::MlEstimate,
            Command::Summarize,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| CliError::Config(format!("unknown command {s}")))
    }
}

/// Number of equally spaced points on which continuous-time rates are
/// reported.
const DEFAULT_GRID: usize = 200;

/// Runs `command` and moves its artifacts into `out_dir`. Files are first
/// written to a staging directory that is deleted on failure, so a failed run
/// leaves nothing behind. Returns the final artifact paths.
pub fn run(command: Command, config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let staging = out_dir.join(format!(".partial-{}", command.name()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
    }
    std::fs::create_dir(&staging).map_err(|e| CliError::io(&staging, e))?;

    let result = dispatch(command, config, &staging).and_then(|names| {
        names
            .into_iter()
            .map(|name| {
                let to = out_dir.join(name);
                std::fs::rename(staging.join(name), &to).map_err(|e| CliError::io(&to, e))?;
                Ok(to)
            })
            .collect::<Result<Vec<_>>>()
    });
    let _ = std::fs::remove_dir_all(&staging);
    result
}

fn dispatch(command: Command, config: &RunConfig, dir: &Path) -> Result<Vec<&'static str>> {
    match command {
        Command::Simulate => simulate(config, dir),
        Command::MlEstimate => ml_estimate(config, dir),
        Command::Summarize => summarize(config, dir),
        Command::FitParametric => {
            let data = io::ingest_removals(config, TimeScale::Continuous)?;
            let priors = ParametricPriors {
                beta: gamma_prior(config, "prior.beta")?,
                gamma: gamma_prior(config, "prior.gamma")?,
                init_gap_rate: config.required("prior.init_gap.rate")?,
            };
            let mut out = run_chains(config, |s| run_parametric_mcmc(&data, &priors, s))?;
            out.function = Some(constant_band(&out, data.last(), grid_points(config)?)?);
            write_fit(config, dir, &out)
        }
        Command::FitDiscreteGp => {
            let data = io::ingest_removals(config, TimeScale::Discrete)?;
            let gp = discrete_config(config, &data)?;
            let out = run_chains(config, |s| run_discrete_gp_mcmc(&data, &gp, s))?;
            write_fit(config, dir, &out)
        }
        Command::FitCtsGp => {
            let data = io::ingest_removals(config, TimeScale::Continuous)?;
            let cts = cts_config(config)?;
            let mut out = run_chains(config, |s| run_cts_gp_mcmc(&data, &cts, s))?;
            if config.or("mcmc.chains", 1usize)? > 1 {
                // put all chains on one grid
                attach_reporting_grid(&mut out, cts.kernel, data.last(), cts.grid_points)?;
            }
            write_fit(config, dir, &out)
        }
    }
}

fn gamma_prior(config: &RunConfig, prefix: &str) -> Result<GammaPrior> {
    Ok(GammaPrior::new(
        config.required(&format!("{prefix}.shape"))?,
        config.required(&format!("{prefix}.rate"))?,
    )?)
}

fn kernel(config: &RunConfig) -> Result<KernelParams> {
    if config.get("gp.jitter").is_some() {
        log::warn!("gp.jitter is ignored; jitter is chosen per factorization");
    }
    Ok(KernelParams::new(
        config.required("gp.omega")?,
        config.required("gp.length_scale")?,
    )?)
}

fn grid_points(config: &RunConfig) -> Result<usize> {
    config.or("cts.grid_points", DEFAULT_GRID)
}

fn discrete_config(config: &RunConfig, data: &RemovalData) -> Result<DiscreteGpConfig> {
    let prior = BetaPrior::new(
        config.required("prior.gamma_beta.a")?,
        config.required("prior.gamma_beta.b")?,
    )?;
    let mut c = DiscreteGpConfig::new(kernel(config)?, prior);
    c.epsilon = config.or("gp.epsilon", c.epsilon)?;
    c.adapt_epsilon = config.or("gp.adapt_epsilon", c.adapt_epsilon)?;
    c.g_updates_per_sweep = config.or("gp.updates_per_sweep", c.g_updates_per_sweep)?;
    c.floor_periods = config.or("discrete.floor_periods", c.floor_periods)?;
    if config.get("data.known_events").is_some() {
        let path = config.path("data.known_events")?;
        let events = io::read_events(&path, data.population(), TimeScale::Discrete)?;
        let histories = events.labelled_histories().ok_or_else(|| {
            CliError::Data(format!("{}: events carry no individual labels", path.display()))
        })?;
        if histories.len() != data.len() {
            return Err(CliError::Data(format!(
                "{} labelled individuals for {} removals",
                histories.len(),
                data.len()
            )));
        }
        c.known_infections = Some(histories.iter().map(|h| h.0 as i64).collect());
    }
    Ok(c)
}

fn cts_config(config: &RunConfig) -> Result<CtsConfig> {
    let mut c = CtsConfig::new(
        kernel(config)?,
        gamma_prior(config, "prior.beta_star")?,
        gamma_prior(config, "prior.gamma")?,
        config.required("prior.init_gap.rate")?,
    );
    c.epsilon = config.or("gp.epsilon", c.epsilon)?;
    c.adapt_epsilon = config.or("gp.adapt_epsilon", c.adapt_epsilon)?;
    c.g_updates_per_sweep = config.or("gp.updates_per_sweep", c.g_updates_per_sweep)?;
    c.thinned_moves_per_sweep = config.parsed("cts.thinned_moves_per_sweep")?;
    c.grid_points = grid_points(config)?;
    Ok(c)
}

fn settings(config: &RunConfig, chain: u64) -> Result<McmcSettings> {
    let mut s = McmcSettings::new(config.required("mcmc.iterations")?, config.seed()?);
    s.burnin = config.or("mcmc.burnin", s.burnin)?;
    s.thin = config.or("mcmc.thin", s.thin)?;
    s.moves_per_sweep = config.parsed("mcmc.moves_per_sweep")?;
    s.stream = chain;
    s.validate()?;
    Ok(s)
}

/// Runs `mcmc.chains` chains in parallel, one generator stream each, and
/// merges them in chain order.
fn run_chains<F>(config: &RunConfig, f: F) -> Result<ChainOutput>
where
    F: Fn(&McmcSettings) -> epinp::Result<ChainOutput> + Sync,
{
    let chains: u64 = config.or("mcmc.chains", 1)?;
    if chains == 0 {
        return Err(CliError::Config("mcmc.chains must be at least 1".into()));
    }
    let all = (0..chains)
        .map(|k| settings(config, k))
        .collect::<Result<Vec<_>>>()?;
    let f = &f;
    let results: Vec<epinp::Result<ChainOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = all.iter().map(|s| scope.spawn(move || f(s))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    let mut merged: Option<ChainOutput> = None;
    for r in results {
        let out = r?;
        merged = Some(match merged {
            None => out,
            Some(m) => m.merge(&out)?,
        });
    }
    Ok(merged.expect("at least one chain"))
}

/// The constant-rate posterior drawn as a flat band on the reporting grid.
fn constant_band(out: &ChainOutput, end: f64, points: usize) -> Result<FunctionTrace> {
    let starts = out.scalar("i_1").unwrap_or(&[]);
    if starts.is_empty() || points < 2 {
        return Err(CliError::Config("nothing retained to report".into()));
    }
    let lower = epinp::stats::quantile(starts, 0.5);
    let step = (end - lower) / (points - 1) as f64;
    let grid = (0..points).map(|k| lower + step * k as f64).collect();
    let rows = out.scalar("beta").unwrap_or(&[]).iter().map(|&b| vec![Some(b); points]).collect();
    Ok(FunctionTrace { grid, rows })
}

fn level(config: &RunConfig) -> Result<f64> {
    let l: f64 = config.or("summary.level", 0.95)?;
    if !(l > 0.0 && l < 1.0) {
        return Err(CliError::Config(format!("summary.level {l} outside (0, 1)")));
    }
    Ok(l)
}

fn write_fit(config: &RunConfig, dir: &Path, out: &ChainOutput) -> Result<Vec<&'static str>> {
    let level = level(config)?;
    io::write_samples(&dir.join("samples.csv"), out)?;
    io::write_parameters(&dir.join("parameters.csv"), out)?;
    let mut summary = match &out.function {
        Some(f) => summarize_trace(f, level),
        None => Default::default(),
    };
    io::write_summary(&dir.join("summary.csv"), &summary)?;

    let params: serde_json::Map<String, serde_json::Value> = out
        .scalars
        .iter()
        .map(|(k, v)| (k.clone(), json!(summarize_scalar(v, level))))
        .collect();
    let acceptance: serde_json::Map<String, serde_json::Value> = out
        .acceptance
        .iter()
        .map(|(k, a)| {
            let v = json!({"accepted": a.accepted, "proposed": a.proposed, "rate": a.rate()});
            (k.clone(), v)
        })
        .collect();
    let mut notes = out.notes.clone();
    notes.append(&mut summary.notes);
    let diag = json!({
        "model": out.model,
        "seed": config.seed()?,
        "chains": out.seeds.len(),
        "iterations": out.iterations,
        "retained": out.len(),
        "elapsed_secs": out.elapsed_secs,
        "level": level,
        "acceptance": acceptance,
        "parameters": params,
        "warnings": out.warnings,
        "notes": notes,
        "config": config.entries(),
        "config_dir": config.base_dir(),
    });
    let path = dir.join("diagnostics.json");
    let text = serde_json::to_string_pretty(&diag).expect("JSON values serialize");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(vec!["samples.csv", "parameters.csv", "summary.csv", "diagnostics.json"])
}

/// Rate specification: a number (constant), `scenario1`, `scenario2`, or a
/// CSV file with header `time,beta` read as a step function.
fn rate_function(config: &RunConfig) -> Result<RateFunction> {
    let spec = config.require("simulate.beta")?;
    let horizon: f64 = config.or("simulate.horizon", 1000.0)?;
    let step: f64 = config.or("simulate.step", 1.0)?;
    if !(step > 0.0 && horizon > 0.0) {
        return Err(CliError::Config("simulate.step and simulate.horizon must be positive".into()));
    }
    let grid = || -> Vec<f64> {
        let n = (horizon / step).ceil() as usize;
        (0..=n).map(|k| k as f64 * step).collect()
    };
    let rate = match spec {
        "scenario1" => RateFunction::tabulate(grid(), scenario1)?,
        "scenario2" => RateFunction::tabulate(grid(), scenario2)?,
        other => match other.parse::<f64>() {
            Ok(b) => RateFunction::constant(b)?,
            Err(_) => {
                let path = config.path("simulate.beta")?;
                read_rate_table(&path)?
            }
        },
    };
    Ok(rate)
}

/// `0.01 exp(-t^(1/3))`.
pub fn scenario1(t: f64) -> f64 {
    0.01 * (-t.max(0.0).cbrt()).exp()
}

/// Two Gaussian bumps of height 0.002 at days 10 and 55.
pub fn scenario2(t: f64) -> f64 {
    0.002 * (-(t - 10.0).powi(2) / 18.0).exp() + 0.002 * (-(t - 55.0).powi(2) / 18.0).exp()
}

fn read_rate_table(path: &Path) -> Result<RateFunction> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        let (t, b) = rec.map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        grid.push(t);
        values.push(b);
    }
    Ok(RateFunction::tabulated(grid, values)?)
}

fn simulate(config: &RunConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let population: usize = config.required("population_size")?;
    let gamma: f64 = config.required("simulate.gamma")?;
    let seed = config.seed()?;
    let rate = rate_function(config)?;
    let events = match config.or("simulate.time_scale", "discrete".to_string())?.as_str() {
        "discrete" => {
            let period = InfectiousPeriodModel::geometric(gamma)?;
            simulate_discrete(population, &rate, &period, seed)?
        }
        "continuous" => simulate_continuous(population, &rate, gamma, seed)?,
        other => {
            return Err(CliError::Config(format!(
                "simulate.time_scale must be discrete or continuous, got {other}"
            )))
        }
    };
    log::info!("final size {} of {population}", events.final_size());
    io::write_events(&dir.join("events.csv"), &events)?;
    io::write_times(&dir.join("removals.csv"), &events.removal_times())?;
    Ok(vec!["events.csv", "removals.csv"])
}

fn ml_estimate(config: &RunConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let path = config.path("data.events")?;
    let population: usize = config.required("population_size")?;
    let events = io::read_events(&path, population, TimeScale::Discrete)?;
    let rows = ml_daily_estimate(&events)?;
    io::write_ml(&dir.join("ml_estimate.csv"), &rows)?;
    Ok(vec!["ml_estimate.csv"])
}

fn summarize(config: &RunConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let samples = io::read_samples(&config.path("summarize.samples")?)?;
    if samples.is_empty() {
        return Err(CliError::Data("no samples to summarize".into()));
    }
    let summary = summarize_samples(&samples, level(config)?);
    io::write_summary(&dir.join("summary.csv"), &summary)?;
    Ok(vec!["summary.csv"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for name in ["simulate", "fit-parametric", "fit-discrete-gp", "fit-cts-gp", "ml-estimate", "summarize"] {
            assert_eq!(name.parse::<Command>().unwrap().name(), name);
        }
        assert!("fit".parse::<Command>().is_err());
    }

    #[test]
    fn scenario_rates() {
        assert_eq!(scenario1(0.0), 0.01);
        assert!((scenario1(8.0) - 0.01 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((scenario2(10.0) - 0.002 * (1.0 + (-2025.0f64 / 18.0).exp())).abs() < 1e-15);
    }

    #[test]
    fn failed_run_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("r.csv"), "time\n1\n2\n").unwrap();
        // population smaller than the number of removals
        let c = RunConfig::parse(
            "data.path = r.csv\npopulation_size = 1\nmcmc.seed = 1\nmcmc.iterations = 10\n\
             prior.gamma_beta.a = 1\nprior.gamma_beta.b = 1\ngp.omega = 1\ngp.length_scale = 2",
            dir.path(),
        )
        .unwrap();
        let out = dir.path().join("out");
        let err = run(Command::FitDiscreteGp, &c, &out).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
    }
}
