use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mrvox_core::backbone::{encode_weights, init_weights};
use mrvox_core::codec::PayloadMode;

use crate::config::Config;
use crate::error::CliError;
use crate::golden::sha256_hex;

/// Initialize a backbone weight container ("MRW1") from a seed.
#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// Output weight file.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Payload mode the weights will consume: coords (3 input channels)
    /// or mean (4).
    #[arg(long)]
    pub mode: Option<PayloadMode>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &WeightsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::resolve(args.config.as_deref())?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let in_channels = match args.mode.unwrap_or(cfg.mode) {
        PayloadMode::CoordsOnly => 3,
        PayloadMode::CoordsPlusMeanFeatures => 4,
    };
    let weights = init_weights(seed, in_channels);
    let bytes = encode_weights(&weights);
    std::fs::write(&args.output, &bytes)?;
    writeln!(
        out,
        "seed={} in_channels={} bytes={} sha256={}",
        seed,
        in_channels,
        bytes.len(),
        sha256_hex(&bytes)
    )?;
    Ok(())
}
