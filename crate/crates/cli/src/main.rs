use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tunnelkit_cli::{execute, CliError, Format, Invocation, Quantity, UsageError};

#[derive(Parser)]
#[command(name = "tunnelkit", version, about = "Real-time tunneling toolkit: scans and plot data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roots of V(x) = E and the h/H regions between them.
    TurningPoints(Common),
    /// Velocity-Verlet trajectory in one region.
    Trajectory(Common),
    /// Half-period between two turning points.
    Period(Common),
    /// WKB amplitude and phase across one region.
    WkbProfile(Common),
    /// Exact and WKB transmission over an energy (or other) sweep.
    TransmissionScan(Common),
    /// Hermiticity and commutator defects of the discrete momentum operators.
    OperatorCheck(Common),
    /// Wave and corpuscular relativistic masses.
    MassTransform(Common),
}

#[derive(Args)]
struct Common {
    /// JSON scan configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration entry by dotted path, e.g. `constants.E=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for the sweep.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(path: Option<&PathBuf>) -> Result<serde_json::Value, CliError> {
    let Some(path) = path else {
        return Ok(serde_json::json!({}));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (quantity, common) = match cli.command {
        Command::TurningPoints(c) => (Quantity::TurningPoints, c),
        Command::Trajectory(c) => (Quantity::Trajectory, c),
        Command::Period(c) => (Quantity::Period, c),
        Command::WkbProfile(c) => (Quantity::WkbProfile, c),
        Command::TransmissionScan(c) => (Quantity::TransmissionScan, c),
        Command::OperatorCheck(c) => (Quantity::OperatorCheck, c),
        Command::MassTransform(c) => (Quantity::MassTransform, c),
    };
    let inv = Invocation {
        overrides: common.set,
        output: common.output,
        format: common.format,
        jobs: common.jobs,
    };
    let result = load(common.config.as_ref()).and_then(|doc| execute(quantity, doc, &inv, std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("tunnelkit: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
