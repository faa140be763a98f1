//! `aniso`: batch front end for kernel evaluation, spectral verification,
//! simulation and Monte Carlo tests.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
//! usage or configuration error.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{parse_hurst, Overrides, RunConfig, ThetaSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Usage(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<aniso_core::Error> for CliError {
    fn from(e: aniso_core::Error) -> Self {
        use aniso_core::Error as E;
        match e {
            E::Domain(_)
            | E::Config(_)
            | E::InvalidGrid(_)
            | E::OffGrid(..)
            | E::DegenerateWitness { .. }
            | E::Io(_) => Self::Usage(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aniso",
    version,
    about = "Anisotropic self-similar Gaussian fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Hurst indices as H1,H2.
    #[arg(long, global = true, value_name = "H1,H2", value_parser = parse_hurst)]
    hurst: Option<[f64; 2]>,

    /// Modulation strength, or "auto" for 0.9 times the closed-form bound.
    #[arg(
        long,
        global = true,
        value_name = "VALUE|auto",
        allow_hyphen_values = true
    )]
    theta: Option<ThetaSpec>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Relative tolerance for identity residuals.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    /// Monte Carlo paths for simulate and test.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<u64>,

    /// Record wall-clock time in the report (makes reports non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Tabulate F_H1, F_H2, R0 and R_theta on a lag grid.
    KernelEval,
    /// Identity, spectral and Gram checks for the configured kernel.
    Verify,
    /// Closed-form admissible theta and its check against the main inequality.
    ThetaBound,
    /// Tables of a(x) and b(x) by series, quadrature and closed form.
    Spectral,
    /// Simulate the field on a grid.
    Simulate,
    /// Monte Carlo tests of increment stationarity and of the fBs hypothesis.
    Test,
}

impl Command {
    fn run(self, cfg: &RunConfig) -> Result<commands::Run, CliError> {
        match self {
            Self::KernelEval => commands::kernel_eval(cfg),
            Self::Verify => commands::verify(cfg),
            Self::ThetaBound => commands::theta_bound_cmd(cfg),
            Self::Spectral => commands::spectral(cfg),
            Self::Simulate => commands::simulate(cfg),
            Self::Test => commands::test(cfg),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ANISO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "ANISO_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    if n == 1 {
        aniso_core::par::set_sequential(true);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let overrides = Overrides {
        hurst: cli.hurst,
        theta: cli.theta,
        seed: cli.seed,
        out: cli.out,
        tol: cli.tol,
        paths: cli.paths,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let start = Instant::now();
    let mut run = cli.command.run(&cfg)?;
    if cli.timing {
        run.report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    let path = output::write_report(&cfg.out, &run.report)?;
    for c in run.report.failures() {
        println!(
            "FAIL {}: {:e} {} {:e}",
            c.name, c.statistic, c.comparison, c.threshold
        );
    }
    println!(
        "{}: {} ({} checks) -> {}",
        run.report.name,
        if run.report.pass { "pass" } else { "FAIL" },
        run.report.checks.len(),
        path.display()
    );
    for f in &run.files {
        println!("wrote {}", f.display());
    }
    Ok(run.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
