use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use clap::Args;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use mrvox_core::nn::{
    build_rulebook, sparse_conv, strided_extent, ConvMode, ConvParams, SparseTensor,
};

use crate::error::CliError;

/// Benchmark rulebook construction and convolution execution on a random
/// sparse tensor, cross-checking rule counts against a dense enumeration.
#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Active sites to draw (without replacement).
    #[arg(long, default_value_t = 5_000)]
    pub sites: usize,
    #[arg(long, default_value_t = 16)]
    pub in_channels: usize,
    #[arg(long, default_value_t = 32)]
    pub out_channels: usize,
}

const SHAPE: [u32; 3] = [48, 48, 12];

/// Counts (offset, input, output) pairs by dense enumeration over the
/// output volume, independent of the rulebook's site indexing.
fn oracle_pair_count(coords: &[[u32; 3]], shape: [u32; 3], mode: ConvMode, stride: u32) -> usize {
    let occupied: BTreeSet<[u32; 3]> = coords.iter().copied().collect();
    let out_shape = match mode {
        ConvMode::Submanifold => shape,
        ConvMode::SparseStrided => [
            strided_extent(shape[0], stride),
            strided_extent(shape[1], stride),
            strided_extent(shape[2], stride),
        ],
    };
    let s = match mode {
        ConvMode::Submanifold => 1i64,
        ConvMode::SparseStrided => stride as i64,
    };
    let mut pairs = 0usize;
    for ox in 0..out_shape[0] {
        for oy in 0..out_shape[1] {
            for oz in 0..out_shape[2] {
                let o = [ox, oy, oz];
                if mode == ConvMode::Submanifold && !occupied.contains(&o) {
                    continue;
                }
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dz in -1i64..=1 {
                            let p = [
                                ox as i64 * s + dx,
                                oy as i64 * s + dy,
                                oz as i64 * s + dz,
                            ];
                            if (0..3).any(|a| p[a] < 0 || p[a] >= shape[a] as i64) {
                                continue;
                            }
                            if occupied.contains(&[p[0] as u32, p[1] as u32, p[2] as u32]) {
                                pairs += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    pairs
}

pub fn run(args: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let capacity = (SHAPE[0] * SHAPE[1] * SHAPE[2]) as usize;
    if args.sites == 0 || args.sites > capacity {
        return Err(CliError::Usage(format!(
            "sites must lie in 1..={capacity} for the {SHAPE:?} bench volume"
        )));
    }
    if args.in_channels == 0 || args.out_channels == 0 {
        return Err(CliError::Usage("channel counts must be positive".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let mut sites: BTreeSet<[u32; 3]> = BTreeSet::new();
    while sites.len() < args.sites {
        sites.insert([
            rng.random_range(0..SHAPE[0]),
            rng.random_range(0..SHAPE[1]),
            rng.random_range(0..SHAPE[2]),
        ]);
    }
    let coords: Vec<[u32; 3]> = sites.into_iter().collect();
    let mut features = Array2::<f32>::zeros((coords.len(), args.in_channels));
    for v in features.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let input = SparseTensor::new(SHAPE, coords.clone(), features)
        .map_err(|e| CliError::Data(e.to_string()))?;

    for (label, mode, stride) in [
        ("submanifold", ConvMode::Submanifold, 1u32),
        ("strided", ConvMode::SparseStrided, 2u32),
    ] {
        let mut weights = Array3::<f32>::zeros((27, args.in_channels, args.out_channels));
        for v in weights.iter_mut() {
            *v = rng.random_range(-0.1..0.1);
        }
        let params =
            ConvParams::new(mode, stride, weights).map_err(|e| CliError::Data(e.to_string()))?;

        let t0 = Instant::now();
        let rb = build_rulebook(&input.coords, SHAPE, mode, stride);
        let build_s = t0.elapsed().as_secs_f64().max(1e-9);
        let rules: usize = rb.rules.iter().map(Vec::len).sum();

        let pairs = oracle_pair_count(&input.coords, SHAPE, mode, stride);

        let t1 = Instant::now();
        let result = sparse_conv(&input, &params).map_err(|e| CliError::Data(e.to_string()))?;
        let exec_s = t1.elapsed().as_secs_f64().max(1e-9);

        writeln!(
            out,
            "bench mode={label} sites={} rules={rules} oracle_pairs={pairs} rules_match={} \
             out_sites={} build_sites_per_s={:.0} exec_sites_per_s={:.0} build_ms={:.3} exec_ms={:.3}",
            input.len(),
            rules == pairs,
            result.len(),
            input.len() as f64 / build_s,
            input.len() as f64 / exec_s,
            build_s * 1e3,
            exec_s * 1e3,
        )?;
    }
    Ok(())
}
