//! Command-line front end: `hom`, `transfer`, `erase`, `tomo` and `fig2`.
//!
//! Settings come from built-in defaults, an optional `key=value` file given
//! with `--config`, and flags, in rising priority. Every run writes its CSV
//! output(s) and a `<out>.manifest.json` next to them.

pub mod commands;
pub mod config;
pub mod io;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{execute, fig2_samples, fig2_tables, hom_table, tomo_table, transfer_table, Fig2Point};
pub use config::{Command, EnvSpec, RunConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(..) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Numerical(_) => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qcarrier",
    version,
    about = "Indistinguishability of photonic qubit carriers: HOM scans, qubit transfer, erasure and tomography"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// Master seed for all Monte-Carlo draws.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output CSV path.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// key=value settings file (or a run manifest); flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Coincidence scan over delays.
    Hom(Opts),
    /// Qubit transfer sweep over delays and phases.
    Transfer(Opts),
    /// Quantum erasure sweep over delays and phases.
    Erase(Opts),
    /// Simulated three-basis tomography of the transferred states.
    Tomo(Opts),
    /// Overlap and maximal eigenvalue against D, with the dip as inset.
    Fig2(Opts),
}

#[derive(Debug, Args, Default)]
pub struct Opts {
    /// Filter center wavelength (nm).
    #[arg(long, allow_hyphen_values = true)]
    pub center_nm: Option<String>,
    /// Filter FWHM (nm).
    #[arg(long, allow_hyphen_values = true)]
    pub fwhm_nm: Option<String>,
    /// Filter shape: rect or gauss.
    #[arg(long, allow_hyphen_values = true)]
    pub shape: Option<String>,
    /// Frequency bins of the quadrature grid.
    #[arg(long, allow_hyphen_values = true)]
    pub bins: Option<String>,
    /// Delays in ps: comma list of values or "start:stop:count" ranges.
    #[arg(long, allow_hyphen_values = true)]
    pub delays: Option<String>,
    /// Far-from-dip delay used for normalization (ps).
    #[arg(long, allow_hyphen_values = true)]
    pub reference_delay: Option<String>,
    /// Delays of the fig2 dip inset.
    #[arg(long, allow_hyphen_values = true)]
    pub inset_delays: Option<String>,
    /// Source phases in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub thetas: Option<String>,
    /// spdc, spdc:<d>, singlet, symmetric-bell, product:<c> or file:<path>.
    #[arg(long, allow_hyphen_values = true)]
    pub env: Option<String>,
    /// Mode-overlap factor m in [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    pub mode_overlap: Option<String>,
    /// Flip the feed-forward when the environment has D < 0.
    #[arg(long)]
    pub compensate_sign: bool,
    /// Mean counts per basis; 0 for ideal statistics.
    #[arg(long, allow_hyphen_values = true)]
    pub counts: Option<String>,
    /// Monte-Carlo repetitions per cell.
    #[arg(long, allow_hyphen_values = true)]
    pub repeats: Option<String>,
    /// Detector efficiencies "eta0,eta1".
    #[arg(long, allow_hyphen_values = true)]
    pub efficiencies: Option<String>,
    /// Iteration cap of the likelihood maximization.
    #[arg(long, allow_hyphen_values = true)]
    pub max_iters: Option<String>,
    /// Stopping threshold on the log-likelihood gain per count.
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<String>,
}

impl Opts {
    fn overrides(&self) -> BTreeMap<String, String> {
        let fields = [
            ("center_nm", &self.center_nm),
            ("fwhm_nm", &self.fwhm_nm),
            ("shape", &self.shape),
            ("bins", &self.bins),
            ("delays", &self.delays),
            ("reference_delay", &self.reference_delay),
            ("inset_delays", &self.inset_delays),
            ("thetas", &self.thetas),
            ("env", &self.env),
            ("mode_overlap", &self.mode_overlap),
            ("counts", &self.counts),
            ("repeats", &self.repeats),
            ("efficiencies", &self.efficiencies),
            ("max_iters", &self.max_iters),
            ("tol", &self.tol),
        ];
        let mut map: BTreeMap<String, String> = fields
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
            .collect();
        if self.compensate_sign {
            map.insert("compensate_sign".into(), "true".into());
        }
        map
    }
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let (command, opts) = match &self.command {
            Sub::Hom(o) => (Command::Hom, o),
            Sub::Transfer(o) => (Command::Transfer, o),
            Sub::Erase(o) => (Command::Erase, o),
            Sub::Tomo(o) => (Command::Tomo, o),
            Sub::Fig2(o) => (Command::Fig2, o),
        };
        let file = match &self.config {
            Some(p) => config::read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let mut overrides = opts.overrides();
        if let Some(s) = &self.seed {
            overrides.insert("seed".into(), s.clone());
        }
        if let Some(o) = &self.out {
            overrides.insert("out".into(), o.clone());
        }
        RunConfig::resolve(command, &file, &overrides)
    }
}

/// Parses, runs and reports; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = cli.resolve().and_then(|cfg| execute(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
