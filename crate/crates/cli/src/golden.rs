//! Deterministic builders for the checked-in golden artifacts. The `golden`
//! command compares their output against the stored files and rewrites them
//! only under `--bless`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use mrvox_core::backbone::{encode_weights, init_weights};
use mrvox_core::codec::{encode, Sublayout, VoxelGridMessage};
use mrvox_core::grid::{GridSpec, Level, PointCloud, Pose, SparseVoxelGrid};
use mrvox_core::sim::{gen_scenario, gen_scene, render_report, simulate, ChannelConfig, Strategy};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A small volume every level divides evenly.
fn corpus_spec(level: Level) -> GridSpec {
    GridSpec::for_volume(level, [-6.4, -3.2, -2.0], [12.8, 6.4, 4.0]).expect("volume divides")
}

fn random_grid(rng: &mut ChaCha20Rng, level: Level, with_features: bool) -> SparseVoxelGrid {
    let spec = corpus_spec(level);
    let n = rng.random_range(5..60usize);
    let mut coords: Vec<[u32; 3]> = (0..n)
        .map(|_| {
            [
                rng.random_range(0..spec.dims[0]),
                rng.random_range(0..spec.dims[1]),
                rng.random_range(0..spec.dims[2]),
            ]
        })
        .collect();
    coords.sort_unstable();
    coords.dedup();
    if with_features {
        let rows = coords.len();
        let feats = ndarray::Array2::from_shape_fn((rows, 4), |_| rng.random_range(-4.0f32..4.0));
        SparseVoxelGrid::with_features(spec, coords, feats).expect("generated grid is valid")
    } else {
        SparseVoxelGrid::from_coords(spec, coords).expect("generated grid is valid")
    }
}

/// Length-prefixed concatenation of a fixed message set covering every
/// sublayout, payload mode, and level.
pub fn message_corpus() -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for level in [Level::High, Level::Medium, Level::Low] {
        for sublayout in [Sublayout::Compat, Sublayout::Packed] {
            for with_features in [false, true] {
                for _ in 0..2 {
                    let grid = random_grid(&mut rng, level, with_features);
                    let pose = Pose::from_yaw_translation(
                        rng.random_range(-3.0..3.0),
                        [
                            rng.random_range(-40.0..40.0),
                            rng.random_range(-15.0..15.0),
                            rng.random_range(-0.5..0.5),
                        ]
                        .into(),
                    );
                    let msg = VoxelGridMessage::new(
                        rng.random_range(0..100),
                        rng.random_range(0..10_000_000),
                        &pose,
                        grid,
                        sublayout,
                    )
                    .expect("corpus message is valid");
                    let bytes = encode(&msg).expect("corpus message encodes");
                    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
                    out.extend_from_slice(&bytes);
                }
            }
        }
    }
    out
}

/// The fixed cloud behind the voxelize golden, in its own sensor frame.
pub fn seed7_cloud() -> PointCloud {
    let frame = gen_scene(7, 2, 20_000).expect("golden scene parameters are valid");
    let points = frame.ego().cloud.points.clone();
    PointCloud::new(points, Pose::identity()).expect("generated points are finite")
}

/// Bytes of the seed-7 cloud voxelized at Low, exactly as cmd_voxelize
/// writes them under default settings.
pub fn voxelize_seed7_low_bytes() -> Result<Vec<u8>, CliError> {
    let cloud = seed7_cloud();
    let spec = GridSpec::canonical(Level::Low);
    let grid = mrvox_core::grid::voxelize(&cloud, &spec);
    let msg = VoxelGridMessage::new(0, 0, &Pose::identity(), grid, Sublayout::Compat)?;
    Ok(encode(&msg)?)
}

/// Aggregate report for the synthetic seed-1 scenario under the uniform
/// strategy and canonical defaults.
pub fn simulate_seed1_report() -> Result<String, CliError> {
    let scenario = gen_scenario(1, 5, 4, 20_000)?;
    let cfg = ChannelConfig::default();
    let specs = mrvox_core::grid::LevelSpecs::canonical();
    let report = simulate(&scenario, &cfg, Strategy::Uniform, &specs, None, 42)?;
    Ok(render_report(&report))
}

/// Hex digest of the seed-42, 3-channel weight container.
pub fn weights_seed42_sha256() -> String {
    sha256_hex(&encode_weights(&init_weights(42, 3)))
}
