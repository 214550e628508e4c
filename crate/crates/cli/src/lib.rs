//! Config-driven runner for Zeno sweeps, history consistency, Schroedinger
//! stability and evolution identity checks.
//!
//! A run reads one JSON config, validates it, and writes `records.csv` and
//! `summary.json` into the output directory.

pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use config::{Diagnostic, ExperimentConfig, LoadError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PRNG: &str = "ChaCha8 (rand_chacha), key = seed as little-endian u64 zero-padded to 32 bytes; \
stream 0 Hamiltonians, stream 1 states";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid config:\n{}", join(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("{field}: {source}")]
    Numeric {
        field: &'static str,
        source: zeno_histories::Error,
    },
    #[error("checks failed: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
    #[error("cannot write records: {0}")]
    Csv(#[from] csv::Error),
}

fn join(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Load(_) | Self::Invalid(_) => EXIT_INVALID,
            Self::Numeric { .. } | Self::ChecksFailed(_) | Self::Output(_) | Self::Csv(_) => EXIT_NUMERIC,
        }
    }
}

impl From<zeno_histories::Error> for RunError {
    fn from(source: zeno_histories::Error) -> Self {
        let field = match source {
            zeno_histories::Error::CapExceeded { .. } => "tolerances.cap",
            _ => "experiment",
        };
        Self::Numeric { field, source }
    }
}

#[derive(Serialize)]
struct Seeds {
    master: u64,
    hamiltonian: u64,
    state: u64,
    prng: &'static str,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    columns: &'a [&'static str],
    results: &'a serde_json::Value,
    failures: &'a [String],
    duration_seconds: f64,
}

/// Paths written by a successful (or check-failing) run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: PathBuf,
    pub summary: PathBuf,
}

pub fn validate_file(path: &Path) -> Result<Vec<Diagnostic>, LoadError> {
    Ok(config::load(path)?.validate())
}

/// Render records as RFC 4180 CSV.
pub fn records_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Validate, run and write outputs. `out` overrides `output.dir`.
///
/// Outputs are written even when tolerance checks fail; the error then
/// carries the failing check names.
pub fn run_file(path: &Path, out: Option<&Path>) -> Result<RunOutput, RunError> {
    let cfg = config::load(path)?;
    run_config(&cfg, out)
}

pub fn run_config(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutput, RunError> {
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(RunError::Invalid(diags));
    }
    let started = Instant::now();
    let outcome = experiments::run(cfg)?;
    let duration = started.elapsed().as_secs_f64();

    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    std::fs::create_dir_all(&dir)?;
    let records = dir.join("records.csv");
    let summary = dir.join("summary.json");
    std::fs::write(&records, records_csv(&outcome.header, &outcome.rows)?)?;

    let doc = RunSummary {
        version: VERSION,
        config: cfg,
        seeds: Seeds {
            master: cfg.seed,
            hamiltonian: cfg.hamiltonian_seed(),
            state: cfg.state_seed(),
            prng: PRNG,
        },
        columns: &outcome.header,
        results: &outcome.results,
        failures: &outcome.failures,
        duration_seconds: duration,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&summary, text)?;

    if outcome.failures.is_empty() {
        Ok(RunOutput { records, summary })
    } else {
        Err(RunError::ChecksFailed(outcome.failures))
    }
}
