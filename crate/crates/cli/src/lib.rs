//! Library side of the `tunnelkit` command-line tool.

// `!(a < b)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use thiserror::Error;
use tunnelkit::TunnelError;

pub use config::{Format, Quantity, ScanConfig};

/// Configuration or command-line problem; exit status 2.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(#[from] UsageError),
    #[error("{name}: {source}", name = .0.name(), source = .0)]
    Compute(#[from] TunnelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

/// Everything a run needs besides the configuration document.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub overrides: Vec<String>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

/// Runs `quantity` on the configuration `doc` and writes the result to the
/// configured path, or to `stdout` when none is given.
///
/// Nothing is written unless every sweep point succeeds.
pub fn execute<W: Write>(
    quantity: Quantity,
    doc: serde_json::Value,
    inv: &Invocation,
    stdout: W,
) -> Result<(), CliError> {
    let doc = config::apply_overrides(doc, &inv.overrides)?;
    let cfg = ScanConfig::from_value(doc)?;
    let points = cfg.points(quantity)?;
    let jobs = inv.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(UsageError("--jobs must be at least 1".to_string()).into());
    }
    let format = inv.format.or(cfg.output.format).unwrap_or_default();
    let path = inv.output.clone().or_else(|| cfg.output.path.clone());

    let results = run::run_points(quantity, &cfg, &points, jobs)?;

    match path {
        Some(path) => {
            let mut out = BufWriter::new(File::create(&path)?);
            run::write_output(&mut out, quantity, &cfg, &points, &results, format)?;
            out.flush()?;
        }
        None => {
            let mut out = BufWriter::new(stdout);
            run::write_output(&mut out, quantity, &cfg, &points, &results, format)?;
            out.flush()?;
        }
    }
    Ok(())
}
