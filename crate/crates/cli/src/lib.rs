//! Command-line front end for `mshom-core`: single runs, convergence
//! sweeps and Riccati iterate tables, written as CSV.
//!
//! Settings come from flags, an optional `key=value` config file, the
//! benchmark case and the library defaults, in that order of precedence.

pub mod commands;
pub mod custom;
pub mod grid;
pub mod report;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use settings::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or output path (exit 2).
    #[error("{0}")]
    Usage(String),
    /// A solver produced NaN/inf or failed to converge (exit 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<mshom_core::Error> for CliError {
    fn from(e: mshom_core::Error) -> Self {
        match e {
            mshom_core::Error::InvalidConfig(_) | mshom_core::Error::Dimension(_) => CliError::Usage(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mshom", version, about = "High-order multiscale solvers for stiff slow-fast ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration for each requested solver.
    #[command(allow_negative_numbers = true)]
    Run(Common),
    /// Sweep eps, dt or tau over a grid and fit convergence slopes.
    #[command(allow_negative_numbers = true)]
    Sweep(Common),
    /// Errors of the linear-case iterates C_k, d_k against the fixed point.
    #[command(allow_negative_numbers = true)]
    Riccati(Common),
    /// List the built-in problems and their default settings.
    ListProblems,
}

/// Every option is also a config-file key (dashes become underscores).
#[derive(Debug, Args)]
struct Common {
    /// `key=value` file; flags override it.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Built-in problem name, or `custom`.
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated solvers: `coupled` and/or manifold orders.
    #[arg(long)]
    k: Option<String>,
    /// Scale separation; a value, a list or a range `lo:hi:logN`.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    /// Coupled-stage step.
    #[arg(long)]
    dt_c: Option<String>,
    /// Macro step; a value, list or range.
    #[arg(long)]
    dt: Option<String>,
    /// Steps between termination checks.
    #[arg(long)]
    n_p: Option<String>,
    /// Manifold order used by the termination check.
    #[arg(long)]
    criterion_order: Option<String>,
    /// `type1` or `type2`.
    #[arg(long)]
    alg: Option<String>,
    /// `forward` or `central`.
    #[arg(long)]
    diff: Option<String>,
    /// Difference step; a value, list or range.
    #[arg(long)]
    tau: Option<String>,
    /// Micro relaxation steps.
    #[arg(long = "M", alias = "micro-steps")]
    micro_steps: Option<String>,
    /// Micro step as a multiple of eps.
    #[arg(long)]
    alpha: Option<String>,
    /// `previous`, `supplied` or `zero`.
    #[arg(long)]
    initial_guess: Option<String>,
    #[arg(long)]
    warm_start: Option<String>,
    /// Step of the coupled reference run (default: closed form if known).
    #[arg(long)]
    reference_dt: Option<String>,
    /// Sweep worker threads (default: MSHOM_JOBS, then all cores).
    #[arg(long)]
    jobs: Option<String>,
    /// CSV path; stdout when absent.
    #[arg(short, long)]
    output: Option<String>,
    /// Random linear instance for `riccati`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    /// Fixed-point tolerance for `riccati`.
    #[arg(long)]
    tol: Option<String>,
    /// Custom problem slow velocity, in x and y.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
    /// Custom problem fast drift, in x and y.
    #[arg(long, allow_hyphen_values = true)]
    g: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    #[arg(long)]
    beta_hat: Option<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings, CliError> {
        let pairs = [
            ("problem", &self.problem),
            ("k", &self.k),
            ("eps", &self.eps),
            ("t_end", &self.t_end),
            ("dt_c", &self.dt_c),
            ("dt", &self.dt),
            ("n_p", &self.n_p),
            ("criterion_order", &self.criterion_order),
            ("alg", &self.alg),
            ("diff", &self.diff),
            ("tau", &self.tau),
            ("M", &self.micro_steps),
            ("alpha", &self.alpha),
            ("initial_guess", &self.initial_guess),
            ("warm_start", &self.warm_start),
            ("reference_dt", &self.reference_dt),
            ("jobs", &self.jobs),
            ("output", &self.output),
            ("seed", &self.seed),
            ("nx", &self.nx),
            ("ny", &self.ny),
            ("tol", &self.tol),
            ("f", &self.f),
            ("g", &self.g),
            ("x0", &self.x0),
            ("y0", &self.y0),
            ("beta_hat", &self.beta_hat),
        ];
        let mut flags = Settings::new();
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::new(),
        };
        let mut merged = flags.or(file);
        if !merged.contains("jobs") {
            if let Ok(jobs) = std::env::var("MSHOM_JOBS") {
                merged.set("jobs", &jobs).map_err(|e| CliError::Usage(format!("MSHOM_JOBS: {e}")))?;
            }
        }
        Ok(merged)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(c) => commands::run(&c.settings()?),
        Command::Sweep(c) => commands::sweep(&c.settings()?),
        Command::Riccati(c) => commands::riccati(&c.settings()?),
        Command::ListProblems => {
            commands::list_problems();
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
