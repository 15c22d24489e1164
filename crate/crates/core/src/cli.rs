//! Command-line entry point shared by the `ecograde` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::error::Error;
use crate::ingest::CleaningRules;
use crate::pipeline::{load_calibration, load_rules, run_ingest, run_score, run_validate};
use crate::score::Scorer;
use crate::service::{serve, ServiceConfig};
use crate::validate::{DEFAULT_CITIES, DEFAULT_SEED};

/// Shared config file. Command-line flags win over every value here.
///
/// ```toml
/// rules = "rules.toml"
/// calibration = "scoring.toml"
///
/// [service]
/// port = 8080
/// data_dir = "store"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub rules: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub service: ServiceConfig,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c: CliConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.rules, &mut c.calibration].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if c.service.data_dir.is_relative() {
            c.service.data_dir = base.join(&c.service.data_dir);
        }
        Ok(c)
    }
}

#[derive(Debug, Parser)]
#[command(name = "ecograde", version, about = "Sustainability scoring for rental listings")]
pub struct Cli {
    /// Shared TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, clean, and deduplicate certificate exports into a store.
    Ingest {
        /// CSV or JSON-lines exports.
        sources: Vec<PathBuf>,
        /// Cleaning rules (TOML); built-in defaults when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every listing in a store and build city baselines.
    Score {
        #[arg(long)]
        store: Option<PathBuf>,
        /// Calibration file (required here or in the config file).
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic interpolated-vs-direct equivalence check.
    Validate {
        /// Comma-separated seeds; one default seed when omitted.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Comma-separated city names; all ten by default.
        #[arg(long, value_delimiter = ',')]
        cities: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Added to interpolated scores to build a counterexample.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        inject_shift: f64,
        #[arg(long)]
        calib: Option<PathBuf>,
    },
    /// Serve the HTTP API over a store.
    Serve {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        calib: Option<PathBuf>,
    },
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    // a second init (tests calling run twice) is harmless
    let _ = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn scorer_for(calib: Option<&Path>) -> Result<Scorer, Error> {
    Ok(match calib {
        Some(p) => Scorer::new(load_calibration(p)?),
        None => Scorer::default(),
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}

/// Run a parsed command.
pub fn run(cli: Cli) -> Result<(), Error> {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Ingest { sources, rules, out } => {
            let rules = match rules.or(config.rules) {
                Some(p) => load_rules(&p)?,
                None => CleaningRules::default(),
            };
            let counts = run_ingest(&sources, &rules, &out, config_path)?;
            println!("{}", serde_json::to_string(&counts)?);
        }
        Command::Score { store, calib, out } => {
            let calib = calib.or(config.calibration).ok_or_else(|| {
                Error::Config("no calibration file: pass --calib or set calibration in the config".into())
            })?;
            let store = store.unwrap_or(config.service.data_dir);
            let counts = run_score(&store, &calib, &out, config_path)?;
            println!("{}", serde_json::to_string(&counts)?);
        }
        Command::Validate {
            seeds,
            cities,
            out,
            inject_shift,
            calib,
        } => {
            let scorer = scorer_for(calib.or(config.calibration).as_deref())?;
            let cities: Vec<&str> = if cities.is_empty() {
                DEFAULT_CITIES.to_vec()
            } else {
                cities.iter().map(|c| c.trim()).collect()
            };
            let seeds = if seeds.is_empty() { vec![DEFAULT_SEED] } else { seeds };
            for (seed, report) in run_validate(&seeds, &cities, inject_shift, &scorer, &out, config_path)? {
                let t = &report.tost;
                let line = serde_json::json!({
                    "seed": seed,
                    "equivalent": t.equivalent,
                    "mean_diff": t.mean_diff,
                    "p_lower": t.p_lower,
                    "p_upper": t.p_upper,
                    "n_interpolated": t.n_g1,
                    "n_direct": t.n_g2,
                });
                println!("{line}");
            }
        }
        Command::Serve { store, port, calib } => {
            let scorer = scorer_for(calib.or(config.calibration).as_deref())?;
            let mut svc = config.service;
            svc.apply_env(|k| std::env::var(k).ok())?;
            if let Some(s) = store {
                svc.data_dir = s;
            }
            if let Some(p) = port {
                svc.port = p;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(&svc, scorer, shutdown_signal()))?;
        }
    }
    Ok(())
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            tracing::error!(error = %e, exit_code = e.exit_code(), "command failed");
            e.exit_code()
        }
    }
}
