use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info, LevelFilter};

use nodal_cli::{run, Command, RunConfig, EXIT_CONFIG};

/// Ground states, linearized eigenpairs and nodal minimax solutions of the
/// scalar field equation.
#[derive(Debug, Parser)]
#[command(name = "nodal-minimax", version)]
struct Args {
    /// Run configuration (TOML subset, see docs/config.md).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Command to run; overrides `command` in the configuration.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Worker threads for `sweep` (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn log_level() -> Result<LevelFilter, String> {
    match std::env::var("NODAL_MINIMAX_LOG") {
        Err(_) => Ok(LevelFilter::Info),
        Ok(v) => match v.as_str() {
            "quiet" => Ok(LevelFilter::Error),
            "info" => Ok(LevelFilter::Info),
            "debug" => Ok(LevelFilter::Debug),
            other => Err(format!(
                "NODAL_MINIMAX_LOG = `{other}`; expected quiet, info or debug"
            )),
        },
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match log_level() {
        Ok(level) => level,
        Err(msg) => {
            eprintln!("configuration error: {msg}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let config = match RunConfig::load(&args.config, args.command) {
        Ok(c) => c,
        Err(err) => {
            error!("{err}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let out = args
        .out
        .or_else(|| config.out.as_ref().map(|o| config.resolve(o)))
        .unwrap_or_else(|| PathBuf::from("nodal-out"));
    if args.jobs == Some(0) {
        error!("configuration error: --jobs must be positive");
        return ExitCode::from(EXIT_CONFIG as u8);
    }

    let report = run(&config, args.jobs);
    if let Err(err) = report.write(&out) {
        error!("{err}");
        return ExitCode::from(err.exit_code() as u8);
    }
    info!(
        "{:?}: report written to {}",
        report.status.outcome,
        out.join("run_report.json").display()
    );
    if let Some(msg) = &report.status.message {
        error!("{msg}");
    }
    ExitCode::from(report.status.exit_code as u8)
}
