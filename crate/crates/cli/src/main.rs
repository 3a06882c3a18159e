//! `pspec`: run spectrum experiments from a TOML config.
//!
//! Exit status: 0 success, 1 configuration or precondition error,
//! 2 numerical or I/O failure, 3 a checked property did not hold.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use precond_spectrum::linalg::DEFAULT_INNER_TOL;

use crate::commands::CliError;
use crate::output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "pspec", version, about = "Spectra of Laplacian-preconditioned elliptic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver seed; overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full or partial spectrum and the hull inclusion check.
    Spectrum(Common),
    /// Residuals of the localized probes over radii and grids.
    VrStudy(Common),
    /// Box eigenmode metrics over a refinement ladder.
    BoxMode(Common),
    /// Whether the spectrum leaves no gap wider than `delta` in an interval.
    FillCheck(Common),
    /// Dense spectrum against the closed form for constant coefficients.
    OracleCheck(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Spectrum(common)
    | Command::VrStudy(common)
    | Command::BoxMode(common)
    | Command::FillCheck(common)
    | Command::OracleCheck(common)) = &cli.command;
    let loaded = config::load(&common.config)?;
    let cfg = &loaded.config;
    let seed = cfg.seed(common.seed);
    log::info!("config {} sha256 {}", common.config.display(), loaded.hash);
    log::info!(
        "seed {seed}; tolerances: tol_incl {:e}, cg inner {DEFAULT_INNER_TOL:e}, solver.tol {:e}, oracle.tol {:e}",
        cfg.spectrum.tol_incl.unwrap_or(precond_spectrum::analysis::DEFAULT_TOL_INCL),
        cfg.solver.tol.unwrap_or(1e-8),
        cfg.oracle.tol,
    );
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    // Validate the section each command needs before touching the file system.
    cfg.field()?;
    match &cli.command {
        Command::Spectrum(_) => drop((cfg.grid()?, cfg.spectrum_options(seed)?)),
        Command::FillCheck(_) => drop((cfg.grid()?, cfg.spectrum_options(seed)?, cfg.fill()?)),
        Command::VrStudy(_) => drop(cfg.vr()?),
        Command::BoxMode(_) => drop(cfg.box_mode()?),
        Command::OracleCheck(_) => drop((cfg.grid()?, cfg.constant_values()?, cfg.oracle_tol()?)),
    }
    let out = OutputDir::create(dir)?;
    match &cli.command {
        Command::Spectrum(_) => commands::spectrum(cfg, seed, &out),
        Command::FillCheck(_) => commands::fill_check(cfg, seed, &out),
        Command::VrStudy(_) => commands::vr_study(cfg, &out),
        Command::BoxMode(_) => commands::box_mode(cfg, &out),
        Command::OracleCheck(_) => commands::oracle_check(cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
