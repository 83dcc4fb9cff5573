//! The fusion backbone: a local stream over the ego cloud, three collective
//! resolution streams, cross-resolution scatter joins, final fusion, and the
//! bird's-eye-view projection.

mod io;

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::codec::CodecError;
use crate::grid::{
    center_features, mean_features, merge_grids, voxelize, GridError, Level, LevelSpecs,
    PointCloud, SparseVoxelGrid,
};
use crate::nn::{
    norm_relu, scatter, sparse_conv, ConvMode, ConvParams, NormParams, Reduce, ShapeError,
    SparseTensor, KERNEL_OFFSETS,
};

pub use io::{
    decode_bev, decode_weights, encode_bev, encode_weights, load_weights, read_bev, save_weights,
    write_bev, BEV_MAGIC, WEIGHTS_MAGIC,
};

#[derive(Debug, Error)]
pub enum BackboneError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Output channel counts of the four blocks in every stream.
pub const BLOCK_CHANNELS: [usize; 4] = [16, 32, 64, 64];

/// Which voxel feature the streams consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// 3-channel voxel center position, computed by the receiver.
    Center,
    /// 4-channel transmitted mean of the contained points.
    Mean,
}

impl FeatureMode {
    pub fn channels(self) -> usize {
        match self {
            FeatureMode::Center => 3,
            FeatureMode::Mean => 4,
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "center" => Ok(FeatureMode::Center),
            "mean" => Ok(FeatureMode::Mean),
            other => Err(format!("unknown feature mode `{other}` (expected center|mean)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Local,
    High,
    Medium,
    Low,
}

/// Stride of the leading convolution in each of the four blocks.
pub fn stride_schedule(stream: Stream) -> [u32; 4] {
    match stream {
        Stream::Local | Stream::High => [1, 2, 2, 2],
        Stream::Medium => [1, 1, 2, 2],
        Stream::Low => [1, 1, 1, 2],
    }
}

/// Spatial shapes after each block of `stream` for a given input extent.
pub fn stream_shape_plan(stream: Stream, input_dims: [u32; 3]) -> [[u32; 3]; 4] {
    let mut dims = input_dims;
    let mut plan = [[0u32; 3]; 4];
    for (b, &s) in stride_schedule(stream).iter().enumerate() {
        dims = dims.map(|n| crate::nn::strided_extent(n, s));
        plan[b] = dims;
    }
    plan
}

/// One convolution block: a sparse (possibly strided) convolution followed
/// by two submanifold convolutions, each with normalization and ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockParams {
    pub conv1: ConvParams,
    pub norm1: NormParams,
    pub conv2: ConvParams,
    pub norm2: NormParams,
    pub conv3: ConvParams,
    pub norm3: NormParams,
}

impl ConvBlockParams {
    pub fn new(
        conv1: ConvParams,
        norm1: NormParams,
        conv2: ConvParams,
        norm2: NormParams,
        conv3: ConvParams,
        norm3: NormParams,
    ) -> Result<Self, ShapeError> {
        if conv1.mode != ConvMode::SparseStrided {
            return Err(ShapeError("block must lead with a sparse convolution".into()));
        }
        for (name, c) in [("second", &conv2), ("third", &conv3)] {
            if c.mode != ConvMode::Submanifold {
                return Err(ShapeError(format!("{name} convolution must be submanifold")));
            }
            if c.in_channels != conv1.out_channels || c.out_channels != conv1.out_channels {
                return Err(ShapeError(format!(
                    "{name} convolution must preserve the block's {} channels",
                    conv1.out_channels
                )));
            }
        }
        for (name, n) in [("first", &norm1), ("second", &norm2), ("third", &norm3)] {
            if n.channels() != conv1.out_channels {
                return Err(ShapeError(format!(
                    "{name} normalization must cover {} channels",
                    conv1.out_channels
                )));
            }
        }
        Ok(Self {
            conv1,
            norm1,
            conv2,
            norm2,
            conv3,
            norm3,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.conv1.out_channels
    }

    pub fn run(&self, input: &SparseTensor) -> Result<SparseTensor, ShapeError> {
        let x = norm_relu(&sparse_conv(input, &self.conv1)?, &self.norm1)?;
        let x = norm_relu(&sparse_conv(&x, &self.conv2)?, &self.norm2)?;
        norm_relu(&sparse_conv(&x, &self.conv3)?, &self.norm3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamWeights {
    pub blocks: [ConvBlockParams; 4],
}

/// All parameters of the backbone, reproducible from `seed` and the input
/// feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneWeights {
    pub local: StreamWeights,
    pub high: StreamWeights,
    pub medium: StreamWeights,
    pub low: StreamWeights,
    pub collective_final: ConvBlockParams,
    pub local_final: ConvBlockParams,
    pub seed: u64,
    pub in_channels: usize,
}

impl BackboneWeights {
    /// Blocks in canonical traversal order: local, high, medium, low streams
    /// block 1..4 each, then the collective-final and local-final blocks.
    /// Initialization, serialization, and golden hashing all walk this order.
    pub fn blocks(&self) -> Vec<&ConvBlockParams> {
        let mut out = Vec::with_capacity(18);
        for s in [&self.local, &self.high, &self.medium, &self.low] {
            out.extend(s.blocks.iter());
        }
        out.push(&self.collective_final);
        out.push(&self.local_final);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut ConvBlockParams> {
        let mut out = Vec::with_capacity(18);
        for s in [
            &mut self.local,
            &mut self.high,
            &mut self.medium,
            &mut self.low,
        ] {
            out.extend(s.blocks.iter_mut());
        }
        out.push(&mut self.collective_final);
        out.push(&mut self.local_final);
        out
    }
}

fn random_conv(
    rng: &mut ChaCha20Rng,
    mode: ConvMode,
    stride: u32,
    in_c: usize,
    out_c: usize,
) -> ConvParams {
    let fan_in = (KERNEL_OFFSETS * in_c) as f32;
    let bound = (6.0 / fan_in).sqrt();
    let weights = Array3::from_shape_simple_fn((KERNEL_OFFSETS, in_c, out_c), || {
        rng.random_range(-bound..bound)
    });
    ConvParams::new(mode, stride, weights).expect("generated weights are valid")
}

fn random_block(rng: &mut ChaCha20Rng, in_c: usize, out_c: usize, stride: u32) -> ConvBlockParams {
    ConvBlockParams::new(
        random_conv(rng, ConvMode::SparseStrided, stride, in_c, out_c),
        NormParams::identity(out_c),
        random_conv(rng, ConvMode::Submanifold, 1, out_c, out_c),
        NormParams::identity(out_c),
        random_conv(rng, ConvMode::Submanifold, 1, out_c, out_c),
        NormParams::identity(out_c),
    )
    .expect("generated block is consistent")
}

fn random_stream(rng: &mut ChaCha20Rng, stream: Stream, in_channels: usize) -> StreamWeights {
    let strides = stride_schedule(stream);
    let mut in_c = in_channels;
    let blocks = std::array::from_fn(|b| {
        let block = random_block(rng, in_c, BLOCK_CHANNELS[b], strides[b]);
        in_c = BLOCK_CHANNELS[b];
        block
    });
    StreamWeights { blocks }
}

/// Deterministic fan-in-scaled initialization: every weight is uniform in
/// plus or minus sqrt(6 / (27 * in_channels)), drawn from a seeded stream in
/// canonical block order. Normalization parameters are identity.
pub fn init_weights(seed: u64, in_channels: usize) -> BackboneWeights {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let local = random_stream(&mut rng, Stream::Local, in_channels);
    let high = random_stream(&mut rng, Stream::High, in_channels);
    let medium = random_stream(&mut rng, Stream::Medium, in_channels);
    let low = random_stream(&mut rng, Stream::Low, in_channels);
    let collective_final = random_block(&mut rng, 64, 64, 1);
    let local_final = random_block(&mut rng, 64, 64, 1);
    BackboneWeights {
        local,
        high,
        medium,
        low,
        collective_final,
        local_final,
        seed,
        in_channels,
    }
}

/// Cross-stream tensors joined into a stream by scatter-max before its
/// third and fourth blocks.
#[derive(Default)]
pub struct StreamTaps<'a> {
    pub before_b3: Option<&'a SparseTensor>,
    pub before_b4: Option<&'a SparseTensor>,
}

fn join(own: SparseTensor, tap: Option<&SparseTensor>) -> Result<SparseTensor, ShapeError> {
    match tap {
        None => Ok(own),
        Some(t) => scatter(&[&own, t], Reduce::Max),
    }
}

/// Runs the four blocks of one stream, returning every block output.
pub fn run_stream(
    input: &SparseVoxelGrid,
    stream: Stream,
    w: &BackboneWeights,
    taps: StreamTaps<'_>,
) -> Result<[SparseTensor; 4], BackboneError> {
    let weights = match stream {
        Stream::Local => &w.local,
        Stream::High => &w.high,
        Stream::Medium => &w.medium,
        Stream::Low => &w.low,
    };
    let x = SparseTensor::from_grid(input)?;
    if x.channels() != w.in_channels {
        return Err(ShapeError(format!(
            "stream input has {} channels, weights expect {}",
            x.channels(),
            w.in_channels
        ))
        .into());
    }
    let b1 = weights.blocks[0].run(&x)?;
    let b2 = weights.blocks[1].run(&b1)?;
    let b3_in = join(b2.clone(), taps.before_b3)?;
    let b3 = weights.blocks[2].run(&b3_in)?;
    let b4_in = join(b3.clone(), taps.before_b4)?;
    let b4 = weights.blocks[3].run(&b4_in)?;
    Ok([b1, b2, b3, b4])
}

/// Dense bird's-eye-view projection of the fused tensor, with z-slices
/// concatenated along the channel axis (channel index = z * C + c).
#[derive(Debug, Clone, PartialEq)]
pub struct BevMap {
    pub width: u32,
    pub height: u32,
    pub z_extent: u32,
    pub fused_channels: u32,
    /// Seed of the weights that produced the map; 0 when untracked.
    pub seed: u64,
    /// Layout (x, y, z * C + c).
    pub data: Array3<f32>,
}

/// Projects a sparse tensor to a dense 2-D map by concatenating its z-slices
/// along the channel axis.
pub fn to_bev(t: &SparseTensor) -> Result<BevMap, ShapeError> {
    let [nx, ny, nz] = t.shape;
    let channels = t.channels();
    let total = nz as usize * channels;
    let mut data = Array3::<f32>::zeros((nx as usize, ny as usize, total));
    for (i, &c) in t.coords.iter().enumerate() {
        let base = c[2] as usize * channels;
        for ch in 0..channels {
            data[[c[0] as usize, c[1] as usize, base + ch]] = t.features[[i, ch]];
        }
    }
    Ok(BevMap {
        width: nx,
        height: ny,
        z_extent: nz,
        fused_channels: channels as u32,
        seed: 0,
        data,
    })
}

fn ego_grid(
    ego_points: &PointCloud,
    spec: &crate::grid::GridSpec,
    mode: FeatureMode,
) -> SparseVoxelGrid {
    match mode {
        FeatureMode::Center => center_features(&voxelize(ego_points, spec)),
        FeatureMode::Mean => mean_features(ego_points, spec),
    }
}

/// Merges the grids assigned to one level, or falls back to the voxelized
/// ego cloud when no grid was received for that level.
fn level_input(
    level: Level,
    specs: &LevelSpecs,
    collective: &[(Level, SparseVoxelGrid)],
    ego_points: &PointCloud,
    mode: FeatureMode,
) -> Result<SparseVoxelGrid, BackboneError> {
    let spec = specs.get(level);
    let mut assigned: Vec<&SparseVoxelGrid> = Vec::new();
    for (l, g) in collective {
        if *l != level {
            continue;
        }
        if g.spec != *spec {
            return Err(GridError::SpecMismatch(format!(
                "grid assigned to level {level} carries spec {:?}, expected {:?}",
                g.spec, spec
            ))
            .into());
        }
        assigned.push(g);
    }
    if assigned.is_empty() {
        return Ok(ego_grid(ego_points, spec, mode));
    }
    match mode {
        FeatureMode::Center => {
            // Occupancy is what travels; features are recomputed locally.
            let stripped: Vec<SparseVoxelGrid> = assigned
                .iter()
                .map(|g| SparseVoxelGrid {
                    spec: g.spec,
                    coords: g.coords.clone(),
                    features: None,
                })
                .collect();
            let refs: Vec<&SparseVoxelGrid> = stripped.iter().collect();
            Ok(center_features(&merge_grids(&refs)?))
        }
        FeatureMode::Mean => {
            for g in &assigned {
                if g.feature_width() != Some(4) {
                    return Err(GridError::FeatureMismatch(
                        "mean feature mode requires 4-channel transmitted features".into(),
                    )
                    .into());
                }
            }
            Ok(merge_grids(&assigned)?)
        }
    }
}

/// Active-site counts along the forward pass, for reporting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardStats {
    /// Input sites per stream: local, high, medium, low.
    pub input_sites: [usize; 4],
    pub local_sites: [usize; 4],
    pub high_sites: [usize; 4],
    pub medium_sites: [usize; 4],
    pub low_sites: [usize; 4],
    pub fused_sites: usize,
}

/// Runs the full backbone over the ego cloud and the grids received for this
/// frame (already expressed in the ego frame).
///
/// Wiring between streams: the medium stream's blocks 2 and 3 feed the high
/// stream's blocks 3 and 4 by scatter-max; the low stream's block 3 feeds
/// the medium stream's block 4; the low stream takes no cross input. The
/// four block-4 outputs fuse with the local stream by one scatter-max, the
/// two final blocks both run on that fused tensor, and their features are
/// concatenated before the BEV projection.
pub fn forward(
    ego_points: &PointCloud,
    collective: &[(Level, SparseVoxelGrid)],
    w: &BackboneWeights,
    specs: &LevelSpecs,
    mode: FeatureMode,
) -> Result<BevMap, BackboneError> {
    forward_with_stats(ego_points, collective, w, specs, mode).map(|(bev, _)| bev)
}

/// [`forward`] plus the per-block active-site counts.
pub fn forward_with_stats(
    ego_points: &PointCloud,
    collective: &[(Level, SparseVoxelGrid)],
    w: &BackboneWeights,
    specs: &LevelSpecs,
    mode: FeatureMode,
) -> Result<(BevMap, ForwardStats), BackboneError> {
    let (local_out, collective_out) = rayon::join(
        || -> Result<([SparseTensor; 4], usize), BackboneError> {
            let local_in = ego_grid(ego_points, &specs.high, mode);
            let n = local_in.len();
            Ok((
                run_stream(&local_in, Stream::Local, w, StreamTaps::default())?,
                n,
            ))
        },
        || -> Result<([[SparseTensor; 4]; 3], [usize; 3]), BackboneError> {
            let low_in = level_input(Level::Low, specs, collective, ego_points, mode)?;
            let low = run_stream(&low_in, Stream::Low, w, StreamTaps::default())?;
            let med_in = level_input(Level::Medium, specs, collective, ego_points, mode)?;
            let medium = run_stream(
                &med_in,
                Stream::Medium,
                w,
                StreamTaps {
                    before_b3: None,
                    before_b4: Some(&low[2]),
                },
            )?;
            let high_in = level_input(Level::High, specs, collective, ego_points, mode)?;
            let high = run_stream(
                &high_in,
                Stream::High,
                w,
                StreamTaps {
                    before_b3: Some(&medium[1]),
                    before_b4: Some(&medium[2]),
                },
            )?;
            Ok((
                [high, medium, low],
                [high_in.len(), med_in.len(), low_in.len()],
            ))
        },
    );
    let (local, local_n) = local_out?;
    let ([high, medium, low], [high_n, med_n, low_n]) = collective_out?;

    let fused = scatter(&[&high[3], &medium[3], &low[3], &local[3]], Reduce::Max)?;
    let stats = ForwardStats {
        input_sites: [local_n, high_n, med_n, low_n],
        local_sites: local.each_ref().map(SparseTensor::len),
        high_sites: high.each_ref().map(SparseTensor::len),
        medium_sites: medium.each_ref().map(SparseTensor::len),
        low_sites: low.each_ref().map(SparseTensor::len),
        fused_sites: fused.len(),
    };
    let collective_head = w.collective_final.run(&fused)?;
    let local_head = w.local_final.run(&fused)?;
    if collective_head.coords != local_head.coords {
        return Err(ShapeError("final block outputs diverged in active sites".into()).into());
    }

    let n = collective_head.len();
    let (ca, cb) = (collective_head.channels(), local_head.channels());
    let mut features = Array2::<f32>::zeros((n, ca + cb));
    for i in 0..n {
        for c in 0..ca {
            features[[i, c]] = collective_head.features[[i, c]];
        }
        for c in 0..cb {
            features[[i, ca + c]] = local_head.features[[i, c]];
        }
    }
    let concat = SparseTensor {
        shape: collective_head.shape,
        coords: collective_head.coords,
        features,
    };
    let mut bev = to_bev(&concat)?;
    bev.seed = w.seed;
    Ok((bev, stats))
}
