use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use crate::error::CliError;
use crate::golden;

/// Check the golden files against freshly computed bytes, or regenerate
/// them with --bless.
#[derive(Debug, Args)]
pub struct GoldenArgs {
    /// Rewrite the golden files instead of comparing.
    #[arg(long)]
    pub bless: bool,
    /// Directory holding the golden files.
    #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/goldens"))]
    pub dir: PathBuf,
}

pub fn run(args: &GoldenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let items: Vec<(&str, Vec<u8>)> = vec![
        ("messages.bin", golden::message_corpus()),
        ("voxelize_low_seed7.svg", golden::voxelize_seed7_low_bytes()?),
        (
            "simulate_uniform_seed1.txt",
            golden::simulate_seed1_report()?.into_bytes(),
        ),
        (
            "weights_seed42.sha256",
            format!("{}\n", golden::weights_seed42_sha256()).into_bytes(),
        ),
    ];

    if args.bless {
        std::fs::create_dir_all(&args.dir)?;
        for (name, bytes) in &items {
            std::fs::write(args.dir.join(name), bytes)?;
            writeln!(out, "golden {name}: blessed ({} bytes)", bytes.len())?;
        }
        return Ok(());
    }

    let mut failed = Vec::new();
    for (name, bytes) in &items {
        let path = args.dir.join(name);
        let status = match std::fs::read(&path) {
            Ok(stored) if stored == *bytes => "ok",
            Ok(_) => {
                failed.push(*name);
                "mismatch"
            }
            Err(_) => {
                failed.push(*name);
                "missing"
            }
        };
        writeln!(out, "golden {name}: {status}")?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "golden files differ ({}); regenerate deliberately with --bless",
            failed.join(", ")
        )))
    }
}
