use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mrvox_core::sim::{gen_scenario, write_scenario};

use crate::error::CliError;

/// Generate a synthetic scenario on disk (".scn" plus one ".pcf" per
/// vehicle per frame).
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write into; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Base name for the scenario files.
    #[arg(long, default_value = "scenario")]
    pub name: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    /// Vehicle count (2 to 7).
    #[arg(long, default_value_t = 4)]
    pub vehicles: usize,
    #[arg(long, default_value_t = 20_000)]
    pub points: usize,
}

pub fn run(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.frames == 0 {
        return Err(CliError::Usage("a scenario needs at least one frame".into()));
    }
    if !(2..=7).contains(&args.vehicles) {
        return Err(CliError::Usage(format!(
            "synthetic scenarios host 2 to 7 vehicles, requested {}",
            args.vehicles
        )));
    }
    let frames = gen_scenario(args.seed, args.frames, args.vehicles, args.points)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let path = write_scenario(&args.out_dir, &args.name, &frames)?;
    writeln!(out, "scenario={}", path.display())?;
    writeln!(
        out,
        "frames={} vehicles={} points_per_vehicle={}",
        args.frames, args.vehicles, args.points
    )?;
    Ok(())
}
