use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mrvox_core::codec::{PayloadMode, Sublayout};
use mrvox_core::sim::{
    gen_scenario, read_scenario, render_report, simulate, ChannelConfig, Strategy,
};

use crate::config::Config;
use crate::error::CliError;

/// Simulate a V2X channel over a scenario and print the bandwidth report.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (".scn"); mutually exclusive with --synthetic.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Generate a synthetic scenario from this seed instead of reading one.
    #[arg(long)]
    pub synthetic: Option<u64>,
    /// Resolution assignment: uniform|budget|high|medium|low.
    #[arg(long, default_value = "uniform")]
    pub strategy: Strategy,
    /// Frame count for --synthetic.
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    /// Vehicle count for --synthetic (2 to 7).
    #[arg(long, default_value_t = 4)]
    pub vehicles: usize,
    /// Points per vehicle for --synthetic.
    #[arg(long, default_value_t = 20_000)]
    pub points: usize,
    /// Channel capacity in Mbit/s; required by the budget strategy.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Message frequency in Hz.
    #[arg(long)]
    pub frequency: Option<f64>,
    /// Communication range in meters.
    #[arg(long)]
    pub range: Option<f64>,
    #[arg(long)]
    pub mode: Option<PayloadMode>,
    #[arg(long)]
    pub sublayout: Option<Sublayout>,
    /// Assignment seed (budget tie-breaking stays deterministic under it).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::resolve(args.config.as_deref())?;
    let scenario = match (&args.scenario, args.synthetic) {
        (Some(path), None) => read_scenario(path)?,
        (None, Some(seed)) => {
            if args.frames == 0 {
                return Err(CliError::Usage("a scenario needs at least one frame".into()));
            }
            if !(2..=7).contains(&args.vehicles) {
                return Err(CliError::Usage(format!(
                    "synthetic scenarios host 2 to 7 vehicles, requested {}",
                    args.vehicles
                )));
            }
            gen_scenario(seed, args.frames, args.vehicles, args.points)?
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --scenario and --synthetic".into(),
            ))
        }
    };

    let channel = ChannelConfig {
        frequency_hz: args.frequency.unwrap_or(cfg.frequency_hz),
        comm_range_m: args.range.unwrap_or(cfg.range_m),
        capacity_mbps: args.capacity.or(cfg.capacity_mbps),
        mode: args.mode.unwrap_or(cfg.mode),
        sublayout: args.sublayout.unwrap_or(cfg.sublayout),
    };
    let specs = cfg.level_specs()?;
    let report = simulate(
        &scenario,
        &channel,
        args.strategy,
        &specs,
        None,
        args.seed.unwrap_or(cfg.seed),
    )?;
    write!(out, "{}", render_report(&report))?;
    Ok(())
}
