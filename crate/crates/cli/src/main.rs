use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use landau_core::oracles::DEFAULT_LEVEL;

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "landau", version, about = "Near-vacuum inhomogeneous Landau equation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Simulation configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; `fit-report` reads an existing run from here.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// LNDK checkpoint to continue from.
    #[arg(long, global = true, value_name = "CHECKPOINT")]
    resume: Option<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation: NDJSON and CSV diagnostics plus checkpoints.
    Run,
    /// Quadrature checks of the interpolation, HLS and dispersion bounds.
    Oracle {
        /// Quadrature refinement level.
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: u32,
    },
    /// Fitted decay slopes against their targets.
    FitReport,
    /// Traveling-Maxwellian fit residual of f♯ at each output time.
    Maxfit,
    /// Weighted sup distance to the free-transport solution at each output time.
    CompareFree,
}

/// How a subcommand ended short of success.
pub enum Failure {
    /// A checked target was missed (exit 2).
    Assertion(String),
    /// Anything else (exit 1).
    Error(String),
}

impl From<landau_core::Error> for Failure {
    fn from(e: landau_core::Error) -> Self {
        Failure::Error(e.qualified())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        landau_core::Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        landau_core::Error::Json(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Error(format!("cli::Csv: {e}"))
    }
}

pub struct Context {
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub quiet: bool,
}

impl Context {
    pub fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn set_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("LANDAU_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Error(format!("cli::ConfigInvalid: LANDAU_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Error(format!("cli::Threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Context {
        config: cli.config,
        output: cli.output,
        resume: cli.resume,
        quiet: cli.quiet,
    };
    let result = set_threads().and_then(|()| match cli.command {
        Command::Run => commands::run(&ctx),
        Command::Oracle { level } => commands::oracle(&ctx, level),
        Command::FitReport => commands::fit_report(&ctx),
        Command::Maxfit => commands::maxfit(&ctx),
        Command::CompareFree => commands::compare_free(&ctx),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("landau: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("landau: {msg}");
            ExitCode::from(1)
        }
    }
}
