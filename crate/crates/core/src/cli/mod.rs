//! Command-line driver: reads a JSON configuration, runs the checks of one
//! subcommand and writes a JSON or CSV report.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a numerical
//! routine misses its accuracy target, 2 on invalid arguments or input.

pub mod config;
pub mod report;
pub mod runners;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Error;
use config::{ChainConfig, FieldError, LatticeConfig, Pphi2Config, SegalConfig, Validate, ZetaConfig};
pub use report::{Check, Report, ReportBuilder, Table};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Library(#[from] Error),
    #[error("could not serialize report: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Io { .. } | Self::Argument(_) => EXIT_INVALID,
            Self::Output(_) => EXIT_FAIL,
            Self::Library(e) => match e {
                Error::InvalidInput(_)
                | Error::InvalidInteraction(_)
                | Error::Capacity { .. }
                | Error::Dimension { .. }
                | Error::InvalidComposition(_)
                | Error::OutOfDomain(_)
                | Error::ContractViolation(_) => EXIT_INVALID,
                Error::NotPositiveDefinite { .. }
                | Error::Convergence { .. }
                | Error::NotTraceClass(_)
                | Error::Accuracy(_) => EXIT_FAIL,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "fieldlab",
    version,
    about = "Transfer operators, lattice fields and functional determinants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Multiplies every check tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
    /// Adds the wall-clock runtime to the report (breaks byte-identity).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spin-chain transfer matrices: free energy, composition, mixing, Gibbs limit.
    Chain,
    /// Lattice Gaussian free field identities.
    Lattice,
    /// Segal amplitudes on discrete cylinders.
    Segal,
    /// Zeta and Fredholm determinants.
    Zeta,
    /// Wick calculus and lattice P(φ)₂ interactions.
    Pphi2,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Chain => "chain",
            Self::Lattice => "lattice",
            Self::Segal => "segal",
            Self::Zeta => "zeta",
            Self::Pphi2 => "pphi2",
        }
    }
}

fn load_config<T>(path: Option<&PathBuf>) -> Result<T, CliError>
where
    T: DeserializeOwned + Default + Validate,
{
    let cfg: T = match path {
        None => T::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                context: format!("reading {}", p.display()),
                source,
            })?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
                path: format!("{}:{}", p.display(), e.path()),
                message: e.into_inner().to_string(),
            })?
        }
    };
    cfg.validate()
        .map_err(|FieldError { path, message }| CliError::Config { path, message })?;
    Ok(cfg)
}

fn execute<T, F>(cli: &Cli, run: F) -> Result<Report, CliError>
where
    T: DeserializeOwned + Default + Validate + Serialize,
    F: FnOnce(&T, &mut ReportBuilder) -> crate::Result<()>,
{
    let cfg: T = load_config(cli.config.as_ref())?;
    let mut rb = ReportBuilder::new(cli.tolerance_scale, cli.seed);
    run(&cfg, &mut rb)?;
    let value = serde_json::to_value(&cfg).map_err(|e| CliError::Output(e.to_string()))?;
    Ok(rb.finish(cli.command.name(), value))
}

/// Runs the subcommand and returns its report.
pub fn run_report(cli: &Cli) -> Result<Report, CliError> {
    if !(cli.tolerance_scale > 0.0 && cli.tolerance_scale.is_finite()) {
        return Err(CliError::Argument(format!(
            "--tolerance-scale must be positive and finite, got {}",
            cli.tolerance_scale
        )));
    }
    let start = Instant::now();
    let mut report = match cli.command {
        Command::Chain => execute::<ChainConfig, _>(cli, runners::run_chain),
        Command::Lattice => execute::<LatticeConfig, _>(cli, runners::run_lattice),
        Command::Segal => execute::<SegalConfig, _>(cli, runners::run_segal),
        Command::Zeta => execute::<ZetaConfig, _>(cli, runners::run_zeta),
        Command::Pphi2 => execute::<Pphi2Config, _>(cli, runners::run_pphi2),
    }?;
    if cli.timing {
        report.runtime_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

fn render(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => report.to_json().map_err(|e| CliError::Output(e.to_string())),
        Format::Csv => report.to_csv().map_err(|e| CliError::Output(e.to_string())),
    }
}

fn write_report(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            context: format!("writing {}", path.display()),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                context: "writing stdout".into(),
                source,
            }),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FIELDLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Argument(format!("FIELDLAB_THREADS must be a positive integer, got {v:?}")))?;
    // A pool that is already configured keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads().and_then(|_| run_report(&cli)).and_then(|report| {
        write_report(&cli, &render(&report, cli.format)?)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.as_str())
                .collect();
            if failed.is_empty() {
                eprintln!("{}: {} checks passed", report.subcommand, report.checks.len());
                EXIT_PASS
            } else {
                eprintln!("{}: failed checks: {}", report.subcommand, failed.join(", "));
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
