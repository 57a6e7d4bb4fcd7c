//! `counterfact`: ingest data, fit the renewal model, evaluate counterfactual allocation
//! strategies and collate a report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use commands::{EvaluateRequest, Family, FitRequest, Preset};
use config::{FileConfig, SamplerSection, DEFAULT_BOOST_DOSES};
use counterfact::counterfactual::MAX_DRAWS;
use error::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
const THREADS_VAR: &str = "COUNTERFACT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "counterfact", version, about = "Counterfactual evaluation of age-dependent vaccine allocation strategies")]
struct Cli {
    /// TOML run configuration; flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset directory and write the factual strategy and severity factors.
    Ingest {
        /// Directory with population.csv, cases.csv, severe.csv and vaccinations.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with known parameters (truth.json).
    Synth {
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the dataset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the posterior of the renewal model.
    Fit(FitArgs),
    /// Evaluate scenario families against a fitted posterior.
    Evaluate(EvaluateArgs),
    /// Collate fit diagnostics and scenario tables into report.md.
    Report {
        /// Directory holding the fit and evaluation outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chains started from the prior.
    #[arg(long)]
    chains: Option<usize>,
    /// Initialisation sweeps before the best chains are kept.
    #[arg(long)]
    init_steps: Option<usize>,
    /// Chains kept after initialisation.
    #[arg(long)]
    keep: Option<usize>,
    /// Tuning sweeps per kept chain.
    #[arg(long)]
    tune: Option<usize>,
    /// Retained draws per kept chain.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Contact mixing factor gamma in [0, 1].
    #[arg(long, value_parser = unit_interval)]
    mixing: Option<f64>,
    /// Day of the first change point after the window start.
    #[arg(long)]
    anchor_day: Option<f64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory holding the fit; scenario outputs are written here too.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset directory; defaults to the one recorded by `fit`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Scenario families to evaluate (repeatable).
    #[arg(long, value_enum)]
    scenario: Vec<Family>,
    /// Extra doses per age group in the uptake scenario.
    #[arg(long)]
    doses: Option<f64>,
    /// Mixing factor; must match the fit.
    #[arg(long, value_parser = unit_interval)]
    mixing: Option<f64>,
    /// Posterior draws propagated per scenario.
    #[arg(long)]
    max_draws: Option<usize>,
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Ingest { data, out } => {
            let data = config::required_path(data, &file.data, "data")?;
            let out = config::required_path(out, &file.out, "out")?;
            let s = commands::ingest(&data, &out)?;
            println!(
                "{} age groups, {} weeks from {}; {} imputed risk factors; outputs in {}",
                s.groups.len(),
                s.weeks,
                s.start,
                s.imputed.len(),
                out.display()
            );
        }
        Command::Synth { preset, seed, out } => {
            let out = config::required_path(out, &file.out, "out")?;
            commands::synth(preset, seed.or(file.seed).unwrap_or(0), &out)?;
            println!("synthetic {preset:?} dataset written to {}", out.display());
        }
        Command::Fit(args) => {
            let overrides = SamplerSection {
                chains: args.chains,
                init_steps: args.init_steps,
                keep: args.keep,
                tune: args.tune,
                draws: args.draws,
            };
            let req = FitRequest {
                data: config::required_path(args.data, &file.data, "data")?,
                out: config::required_path(args.out, &file.out, "out")?,
                mixing: args.mixing.or(file.mixing).unwrap_or(counterfact::dynamics::ModelConfig::default().gamma),
                anchor_day: args.anchor_day.or(file.anchor_day),
                sampler: file.sampler(&overrides, args.seed)?,
            };
            let outcome = commands::fit(&req)?;
            let s = &outcome.summary;
            println!(
                "{} draws written to {}; max split R-hat {:.3}, min ESS {:.0}",
                s.draws,
                req.out.join(commands::POSTERIOR_FILE).display(),
                s.max_rhat,
                s.min_ess
            );
            if let Some(r) = outcome.recovery {
                println!(
                    "recovery: R_base median within {:.0}% of truth on {}/{} age-weeks ({:.1}%)",
                    100.0 * r.rel_tol,
                    r.within,
                    r.cells,
                    100.0 * r.share
                );
            }
        }
        Command::Evaluate(args) => {
            let families = if args.scenario.is_empty() {
                file.scenarios.iter().map(|s| Family::parse(s)).collect::<CliResult<Vec<_>>>()?
            } else {
                args.scenario
            };
            let req = EvaluateRequest {
                out: config::required_path(args.out, &file.out, "out")?,
                data: args.data.or(file.data.clone()),
                families: if families.is_empty() { vec![Family::Strategies] } else { families },
                doses: args.doses.or(file.doses).unwrap_or(DEFAULT_BOOST_DOSES),
                mixing: args.mixing.or(file.mixing),
                max_draws: args.max_draws.or(file.max_draws).unwrap_or(MAX_DRAWS),
                waves: file.waves.clone(),
            };
            if !(req.doses.is_finite() && req.doses >= 0.0) {
                return Err(CliError::Config(format!("--doses {} must be non-negative", req.doses)));
            }
            if req.max_draws == 0 {
                return Err(CliError::Config("--max-draws must be positive".into()));
            }
            for record in commands::evaluate(&req)? {
                println!(
                    "{}: {} rows over {} draws written to {}",
                    record.family.name(),
                    record.rows.len(),
                    record.draws,
                    commands::record_path(&req.out, record.family).display()
                );
            }
        }
        Command::Report { out } => {
            let out = config::required_path(out, &file.out, "out")?;
            let path = commands::report(&out)?;
            println!("report written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    info!("counterfact {}", env!("CARGO_PKG_VERSION"));
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
