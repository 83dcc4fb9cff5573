//! Command-line frontend for the multi-resolution sparse voxel exchange
//! toolkit: voxelization, codec, bandwidth accounting, backbone inference,
//! channel simulation, and benchmarks.

pub mod commands;
pub mod config;
pub mod golden;

mod error;

pub use error::CliError;

use std::io::Write;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mrvox",
    version,
    about = "Multi-resolution sparse voxel grids for cooperative perception"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Voxelize a point cloud into a grid message ("SVG1").
    Voxelize(commands::voxelize::VoxelizeArgs),
    /// Report bandwidth for message sizes or files.
    Bandwidth(commands::bandwidth::BandwidthArgs),
    /// Run the fusion backbone and write a BEV map ("BEV1").
    Forward(commands::forward::ForwardArgs),
    /// Simulate a V2X channel over a scenario.
    Simulate(commands::simulate::SimulateArgs),
    /// Generate a synthetic scenario on disk.
    Synth(commands::synth::SynthArgs),
    /// Initialize a backbone weight container ("MRW1").
    Weights(commands::weights::WeightsArgs),
    /// Benchmark rulebook construction and convolution execution.
    Bench(commands::bench::BenchArgs),
    /// Check or regenerate the golden files.
    Golden(commands::golden::GoldenArgs),
}

/// Parses `args` (including the program name) and runs the command,
/// writing program output to `out`. Diagnostics are the caller's concern:
/// errors come back as values carrying their exit code.
pub fn run(args: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(out, "{e}")?;
                    Ok(())
                }
                _ => Err(CliError::Usage(e.to_string())),
            };
        }
    };
    match &cli.command {
        Command::Voxelize(a) => commands::voxelize::run(a, out),
        Command::Bandwidth(a) => commands::bandwidth::run(a, out),
        Command::Forward(a) => commands::forward::run(a, out),
        Command::Simulate(a) => commands::simulate::run(a, out),
        Command::Synth(a) => commands::synth::run(a, out),
        Command::Weights(a) => commands::weights::run(a, out),
        Command::Bench(a) => commands::bench::run(a, out),
        Command::Golden(a) => commands::golden::run(a, out),
    }
}
