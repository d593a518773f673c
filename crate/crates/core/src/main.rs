use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use star_cov::cli::{emit, parse_grid, parse_protocols, run_command, Command};
use star_cov::config::{parse_config, OutputFormat, OutputTarget, RunConfig};
use star_cov::{BetaCoupling, Error, SweepAxis};

/// Upper bound on rayon worker threads.
const WORKERS_ENV: &str = "STAR_COV_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "star-cov", version, about = "Ergodic rates and coverage regions for STAR-RIS NOMA/OMA downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Flat key/value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured Monte-Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Output file, or `-` for standard output.
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Axis {
    NElements,
    SnrDb,
    BetaSq,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Coupling {
    EnergySplit,
    Independent,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Per-user NOMA and OMA ergodic rates at fixed distances.
    Rate {
        /// Reflect-side user distance from the surface, metres.
        #[arg(long = "d-r")]
        d_r: Option<f64>,
        /// Transmit-side user distance from the surface, metres.
        #[arg(long = "d-t")]
        d_t: Option<f64>,
    },
    /// Maximum distance per user and protocol for the configured target rates.
    Coverage,
    /// Coverage distances along one parameter axis.
    Sweep {
        /// Parameter to vary.
        #[arg(long, value_enum)]
        axis: Axis,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long)]
        grid: String,
        /// Comma-separated protocols to solve.
        #[arg(long, default_value = "noma,oma")]
        protocols: String,
        /// How a beta_sq grid value sets the two amplitudes.
        #[arg(long, value_enum, default_value = "energy_split")]
        beta_coupling: Coupling,
    },
    /// Quadrature vs Monte-Carlo rates and Gamma-fit diagnostics.
    McValidate {
        /// Monte-Carlo draws per estimate.
        #[arg(long)]
        samples: Option<u64>,
        /// Reflect-side user distance, metres.
        #[arg(long = "d-r")]
        d_r: Option<f64>,
        /// Transmit-side user distance, metres.
        #[arg(long = "d-t")]
        d_t: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(f) = cli.format {
        cfg.output_format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output_path = OutputTarget::from_arg(out);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli)?;
    let cmd = match cli.command {
        Cmd::Rate { d_r, d_t } => {
            cfg.distance_reflect_m = d_r.unwrap_or(cfg.distance_reflect_m);
            cfg.distance_transmit_m = d_t.unwrap_or(cfg.distance_transmit_m);
            Command::Rate
        }
        Cmd::Coverage => Command::Coverage,
        Cmd::Sweep {
            axis,
            grid,
            protocols,
            beta_coupling,
        } => Command::Sweep {
            axis: match axis {
                Axis::NElements => SweepAxis::NElements,
                Axis::SnrDb => SweepAxis::SnrDb,
                Axis::BetaSq => SweepAxis::BetaSq,
            },
            grid: parse_grid(&grid)?,
            protocols: parse_protocols(&protocols)?,
            coupling: match beta_coupling {
                Coupling::EnergySplit => BetaCoupling::EnergySplit,
                Coupling::Independent => BetaCoupling::Independent,
            },
        },
        Cmd::McValidate { samples, d_r, d_t } => {
            cfg.mc.n_samples = samples.unwrap_or(cfg.mc.n_samples);
            cfg.distance_reflect_m = d_r.unwrap_or(cfg.distance_reflect_m);
            cfg.distance_transmit_m = d_t.unwrap_or(cfg.distance_transmit_m);
            Command::McValidate
        }
    };
    let report = run_command(&cmd, &cfg)?;
    emit(&report, &cfg)
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Error::Config {
        location: format!("environment `{WORKERS_ENV}`"),
        message: format!("expected a positive integer, got `{raw}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config {
            location: format!("environment `{WORKERS_ENV}`"),
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_workers().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("star-cov: error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
