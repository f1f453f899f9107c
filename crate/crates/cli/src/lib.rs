//! Command-line front end for `metgeo`: the field file format, the
//! subcommands, and report emission.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 domain
//! error.

// comparisons written as `!(x <= tol)` are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod fieldfile;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};
use commands::{CheckMode, CheckOptions};
use fieldfile::LoadOptions;
use output::{Format, Sink};

/// Distances, geodesics and checks for fields of Riemannian metrics.
#[derive(Debug, Parser)]
#[command(name = "metgeo", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Rescale grid weights to sum to one instead of rejecting the file.
    #[arg(long, global = true)]
    pub normalize_weights: bool,

    /// Pass threshold for checks (cat0 violation, explog reconstruction).
    #[arg(long, global = true, value_name = "X")]
    pub tolerance: Option<f64>,

    /// Machine-readable output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write machine-readable output here; a summary still goes to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Field distance, with the per-sample distance table.
    Dist {
        file: PathBuf,
        field0: String,
        field1: String,
    },
    /// Sample the minimal path between two fields.
    Geodesic {
        file: PathBuf,
        field0: String,
        field1: String,
        #[arg(long, default_value_t = 11, value_name = "N")]
        t_samples: usize,
    },
    /// Initial velocity of the geodesic at every sample.
    Explog {
        file: PathBuf,
        field0: String,
        field1: String,
        /// Map the velocities back and report the reconstruction error.
        #[arg(long)]
        verify: bool,
    },
    /// Randomized verification sweeps.
    Check {
        #[arg(value_enum)]
        mode: CheckMode,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Include triangles with sides through the cone point (cat0).
        #[arg(long)]
        include_cone: bool,
        /// JSON list of pairs to use instead of the built-in corpus (oracle).
        #[arg(long, value_name = "PATH")]
        pairs: Option<PathBuf>,
    },
}

/// Sizes the worker pool from `METGEO_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("METGEO_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("METGEO_THREADS must be a positive integer, got {value:?}")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    if let Some(tol) = cli.tolerance {
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(CliError::input("--tolerance must be a finite non-negative number"));
        }
    }
    let sink = Sink {
        format: cli.format,
        out: cli.out,
    };
    let load_opts = LoadOptions {
        normalize_weights: cli.normalize_weights,
        ..LoadOptions::default()
    };
    match cli.command {
        Command::Dist { file, field0, field1 } => {
            let (_, ds) = commands::load(&file, load_opts)?;
            commands::dist(&ds, &field0, &field1, &sink)
        }
        Command::Geodesic {
            file,
            field0,
            field1,
            t_samples,
        } => {
            let (raw, ds) = commands::load(&file, load_opts)?;
            commands::geodesic(&raw, &ds, &field0, &field1, t_samples, &sink)
        }
        Command::Explog {
            file,
            field0,
            field1,
            verify,
        } => {
            let (_, ds) = commands::load(&file, load_opts)?;
            commands::explog(&ds, &field0, &field1, verify, cli.tolerance.unwrap_or(1e-8), &sink)
        }
        Command::Check {
            mode,
            trials,
            seed,
            include_cone,
            pairs,
        } => {
            if sink.format == Some(Format::Csv) {
                return Err(CliError::input("check reports are JSON only"));
            }
            let opts = CheckOptions {
                mode,
                trials,
                seed,
                include_cone,
                pairs,
                tolerance: cli.tolerance,
            };
            commands::check(&opts, &sink)
        }
    }
}
