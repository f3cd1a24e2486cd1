//! Command-line pipelines over `posefuse-core`.
//!
//! Exit codes: 0 success, 2 parse error, 3 invalid parameter, 4 I/O error,
//! 5 some composite jobs failed, 6 training diverged.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use error::CliError;

/// Environment variable capping worker threads (0 or unset = all cores).
pub const THREADS_ENV: &str = "POSEFUSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "posefuse", version, about = "Hand-pose retrieval, compositing and evaluation")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or query a product-quantization pose index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Write the edge (shape) map and blurred (color) map of an image.
    Maps(commands::maps::MapsArgs),
    /// Run a compositing manifest.
    Composite(commands::composite::CompositeArgs),
    /// Score predictions against ground truth.
    Eval(commands::eval::EvalArgs),
    /// Train the toy conditional adversarial model.
    TrainToy(commands::toy::TrainToyArgs),
    /// Compute shape, color and TA losses for one image triple.
    Loss(commands::loss::LossArgs),
    /// Write a seeded bank of procedural poses.
    SynthPoses(commands::synth::SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    Build(commands::index::BuildArgs),
    Query(commands::index::QueryArgs),
}

/// Serializes `value` as pretty JSON to `path`, or to stdout.
pub(crate) fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn configure_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Param(format!("{THREADS_ENV}={v} is not a count")))?,
        Err(_) => 0,
    };
    // A pool may already exist when running in-process more than once.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Index(IndexCommand::Build(a)) => commands::index::build(&a),
        Command::Index(IndexCommand::Query(a)) => commands::index::query(&a),
        Command::Maps(a) => commands::maps::run(&a),
        Command::Composite(a) => commands::composite::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::TrainToy(a) => commands::toy::run(&a),
        Command::Loss(a) => commands::loss::run(&a),
        Command::SynthPoses(a) => commands::synth::run(&a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let result = config::expand_config(args).and_then(|args| {
        let cli = Cli::try_parse_from(args).map_err(|e| {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return None;
            }
            Some(CliError::Parse(e.to_string()))
        });
        match cli {
            Ok(cli) => {
                configure_threads()?;
                dispatch(cli).map(|_| true)
            }
            Err(None) => Ok(false),
            Err(Some(e)) => Err(e),
        }
    });
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
