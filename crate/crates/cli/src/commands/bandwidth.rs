use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mrvox_core::codec::{bandwidth, truncate_tenths};

use crate::config::Config;
use crate::error::CliError;

/// Report per-message and mean bandwidth for byte counts or message files.
#[derive(Debug, Args)]
pub struct BandwidthArgs {
    /// Byte counts or message file paths, at least one.
    #[arg(required = true)]
    pub inputs: Vec<String>,
    /// Sensor frequency in Hz.
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &BandwidthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::resolve(args.config.as_deref())?;
    let frequency = args.frequency.unwrap_or(cfg.frequency_hz);
    if !(frequency > 0.0) {
        return Err(CliError::Usage("frequency must be positive".into()));
    }
    let mut raw = Vec::with_capacity(args.inputs.len());
    for input in &args.inputs {
        let bytes = match input.parse::<u64>() {
            Ok(n) => n,
            Err(_) => std::fs::metadata(input)
                .map_err(|e| CliError::Data(format!("cannot read {input}: {e}")))?
                .len(),
        };
        let report = bandwidth(bytes, frequency);
        writeln!(
            out,
            "input={} bytes={} mbps={}",
            input,
            bytes,
            report.display_mbps()
        )?;
        raw.push(report.bandwidth_mbps);
    }
    // The mean is taken over exact values and truncated only for display.
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    writeln!(out, "mean_mbps={:.1}", truncate_tenths(mean))?;
    Ok(())
}
