use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use mrvox_core::backbone::{
    encode_bev, forward_with_stats, init_weights, load_weights, FeatureMode,
};
use mrvox_core::codec::{decode, PayloadMode};
use mrvox_core::grid::{read_point_cloud_file, regrid, Level, LevelSpecs, Pose, SparseVoxelGrid};

use crate::config::Config;
use crate::error::CliError;
use crate::golden::sha256_hex;

/// The small demonstration volume: every level divides it and the streams
/// converge, keeping the dense BEV allocation tiny.
pub const REDUCED_ORIGIN: [f32; 3] = [-8.8, -2.4, -3.0];
pub const REDUCED_EXTENT: [f64; 3] = [17.6, 4.8, 4.0];

/// Run the fusion backbone over an ego cloud and received CAV messages,
/// writing the BEV map ("BEV1").
#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Ego point cloud ("PCF1").
    #[arg(long)]
    pub ego: PathBuf,
    /// Output BEV file.
    #[arg(long)]
    pub output: PathBuf,
    /// Received CAV message file; repeatable. Message poses are taken
    /// relative to the ego frame.
    #[arg(long = "message")]
    pub messages: Vec<PathBuf>,
    /// Weight container ("MRW1"); defaults to seeded initialization.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Initialization seed when no weight file is given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Payload mode the inputs use: coords|mean.
    #[arg(long)]
    pub mode: Option<PayloadMode>,
    /// Rayon threads for this invocation; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Use the reduced demonstration volume instead of the configured one.
    #[arg(long)]
    pub reduced: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &ForwardArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::resolve(args.config.as_deref())?;
    let mode = args.mode.unwrap_or(cfg.mode);
    let feature_mode = match mode {
        PayloadMode::CoordsOnly => FeatureMode::Center,
        PayloadMode::CoordsPlusMeanFeatures => FeatureMode::Mean,
    };
    let (origin, extent) = if args.reduced {
        (REDUCED_ORIGIN, REDUCED_EXTENT)
    } else {
        (cfg.origin, cfg.extent)
    };
    let specs = LevelSpecs::new(origin, extent)
        .map_err(|e| CliError::Usage(format!("volume is invalid: {e}")))?;

    let weights = match args.weights.as_ref().or(cfg.weights.as_ref()) {
        Some(path) => load_weights(path)?,
        None => init_weights(args.seed.unwrap_or(cfg.seed), feature_mode.channels()),
    };
    if weights.in_channels != feature_mode.channels() {
        return Err(CliError::Data(format!(
            "weights expect {}-channel input but mode provides {}",
            weights.in_channels,
            feature_mode.channels()
        )));
    }

    let ego = read_point_cloud_file(&args.ego, Pose::identity())?;
    let mut collective: Vec<(Level, SparseVoxelGrid)> = Vec::with_capacity(args.messages.len());
    for path in &args.messages {
        let bytes = std::fs::read(path)?;
        let msg = decode(&bytes)?;
        let level = msg.spec().level;
        let grid = regrid(&msg.grid, specs.get(level), &msg.sender_pose);
        collective.push((level, grid));
    }

    let started = Instant::now();
    let compute = || forward_with_stats(&ego, &collective, &weights, &specs, feature_mode);
    let (bev, stats) = match args.threads {
        Some(0) => return Err(CliError::Usage("threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?
            .install(compute)?,
        None => compute()?,
    };
    let elapsed = started.elapsed();

    let encoded = encode_bev(&bev);
    std::fs::write(&args.output, &encoded)?;
    writeln!(
        out,
        "bev width={} height={} z={} channels={} data_channels={}",
        bev.width,
        bev.height,
        bev.z_extent,
        bev.fused_channels,
        bev.z_extent * bev.fused_channels
    )?;
    writeln!(
        out,
        "input_sites local={} high={} medium={} low={}",
        stats.input_sites[0], stats.input_sites[1], stats.input_sites[2], stats.input_sites[3]
    )?;
    for (name, sites) in [
        ("local", stats.local_sites),
        ("high", stats.high_sites),
        ("medium", stats.medium_sites),
        ("low", stats.low_sites),
    ] {
        writeln!(
            out,
            "{name}_sites b1={} b2={} b3={} b4={}",
            sites[0], sites[1], sites[2], sites[3]
        )?;
    }
    writeln!(out, "fused_sites={}", stats.fused_sites)?;
    writeln!(out, "sha256={}", sha256_hex(&encoded))?;
    writeln!(out, "time_ms={:.1}", elapsed.as_secs_f64() * 1e3)?;
    Ok(())
}
