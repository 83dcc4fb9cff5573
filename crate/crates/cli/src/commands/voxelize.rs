use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mrvox_core::codec::{
    encode, PayloadMode, Sublayout, VoxelGridMessage, MESSAGE_HEADER_BYTES,
};
use mrvox_core::grid::{mean_features, read_point_cloud_file, voxelize, GridSpec, Level, Pose};

use crate::config::Config;
use crate::error::CliError;

/// Convert a point cloud file into an encoded sparse voxel grid message.
#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// Input point cloud ("PCF1").
    #[arg(long)]
    pub input: PathBuf,
    /// Output message file ("SVG1").
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Resolution level: high|medium|low.
    #[arg(long)]
    pub level: Option<Level>,
    /// Payload mode: coords|mean.
    #[arg(long)]
    pub mode: Option<PayloadMode>,
    /// Coordinate sublayout: compat|packed.
    #[arg(long)]
    pub sublayout: Option<Sublayout>,
    /// Sender id stamped into the message header.
    #[arg(long, default_value_t = 0)]
    pub sender: u32,
    /// Timestamp in microseconds.
    #[arg(long, default_value_t = 0)]
    pub timestamp: u64,
}

pub fn run(args: &VoxelizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::resolve(args.config.as_deref())?;
    let level = args.level.unwrap_or(cfg.level);
    let mode = args.mode.unwrap_or(cfg.mode);
    let sublayout = args.sublayout.unwrap_or(cfg.sublayout);
    let spec = GridSpec::for_volume(level, cfg.origin, cfg.extent)
        .map_err(|e| CliError::Usage(format!("configured volume is invalid: {e}")))?;
    let cloud = read_point_cloud_file(&args.input, Pose::identity())?;
    let grid = match mode {
        PayloadMode::CoordsOnly => voxelize(&cloud, &spec),
        PayloadMode::CoordsPlusMeanFeatures => mean_features(&cloud, &spec),
    };
    let voxels = grid.len();
    let msg = VoxelGridMessage::new(
        args.sender,
        args.timestamp,
        &Pose::identity(),
        grid,
        sublayout,
    )?;
    let bytes = encode(&msg)?;
    std::fs::write(&args.output, &bytes)?;
    writeln!(
        out,
        "voxels={} payload_bytes={} total_bytes={}",
        voxels,
        bytes.len() as u64 - MESSAGE_HEADER_BYTES as u64,
        bytes.len()
    )?;
    Ok(())
}
