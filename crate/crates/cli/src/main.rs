//! Experiment driver: synthetic data generation, reconstruction runs, field
//! rendering, and a quick invariant self-test.

mod commands;
mod selftest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kv2d", about = "Phase-field cavity reconstruction from boundary measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic boundary measurements on a fine hole mesh.
    Forward {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trace CSVs and the forward-mesh VTK.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct the cavity from measurement files.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Measurement trace CSVs (from `forward`).
        #[arg(required_unless_present = "resume")]
        measurements: Vec<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override max_iterations.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Continue from a snapshot directory written by a previous run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Rasterize a phase field to PGM plus an SVG contour overlay.
    Render {
        /// Field CSV (references its mesh file).
        field: PathBuf,
        /// Output PGM path; the SVG lands next to it.
        out: PathBuf,
        /// Mesh override (defaults to the reference inside the field file).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Config providing the truth outline for the overlay.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Selftest,
}

fn configure_threads() {
    if let Ok(value) = std::env::var("KV_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

/// Exit 2 for configuration problems, 1 for anything numerical or io.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<kv2d::config::ConfigError>().is_some() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Forward { config, out, seed } => commands::forward(&config, &out, seed),
        Command::Invert { config, out, measurements, seed, max_iter, resume } => {
            commands::invert(&config, &out, &measurements, seed, max_iter, resume.as_deref())
        }
        Command::Render { field, out, mesh, config } => {
            commands::render(&field, &out, mesh.as_deref(), config.as_deref())
        }
        Command::Selftest => selftest::run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
