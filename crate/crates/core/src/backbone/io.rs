//! Binary containers: "MRW1" for backbone weights, "BEV1" for the dense
//! bird's-eye-view map. All fields little endian.

use std::path::Path;

use ndarray::Array3;

use crate::codec::{CodecError, Cursor};
use crate::nn::{ConvMode, ConvParams, NormParams};

use super::{init_weights, BackboneWeights, BevMap, ConvBlockParams};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"MRW1";
pub const WEIGHTS_VERSION: u8 = 1;
pub const BEV_MAGIC: [u8; 4] = *b"BEV1";

fn push_f32s<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn conv_record(out: &mut Vec<u8>, c: &ConvParams) {
    out.push(match c.mode {
        ConvMode::Submanifold => 0,
        ConvMode::SparseStrided => 1,
    });
    out.push(c.stride as u8);
    out.extend_from_slice(&(c.in_channels as u32).to_le_bytes());
    out.extend_from_slice(&(c.out_channels as u32).to_le_bytes());
    push_f32s(out, c.weights.iter());
}

fn norm_record(out: &mut Vec<u8>, n: &NormParams) {
    out.extend_from_slice(&(n.channels() as u32).to_le_bytes());
    out.extend_from_slice(&n.eps.to_le_bytes());
    for arr in [&n.gamma, &n.beta, &n.mean, &n.var] {
        push_f32s(out, arr.iter());
    }
}

/// Serializes weights: header (magic, version, seed, input channels, block
/// count) followed by every block's convolution and normalization tensors in
/// canonical block order.
pub fn encode_weights(w: &BackboneWeights) -> Vec<u8> {
    let blocks = w.blocks();
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.push(WEIGHTS_VERSION);
    out.extend_from_slice(&w.seed.to_le_bytes());
    out.extend_from_slice(&(w.in_channels as u32).to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        conv_record(&mut out, &b.conv1);
        norm_record(&mut out, &b.norm1);
        conv_record(&mut out, &b.conv2);
        norm_record(&mut out, &b.norm2);
        conv_record(&mut out, &b.conv3);
        norm_record(&mut out, &b.norm3);
    }
    out
}

fn read_conv(cur: &mut Cursor<'_>, expect: &ConvParams) -> Result<ConvParams, CodecError> {
    let mode = match cur.u8("conv mode")? {
        0 => ConvMode::Submanifold,
        1 => ConvMode::SparseStrided,
        other => {
            return Err(CodecError::UnsupportedFormat(format!(
                "unknown convolution mode {other}"
            )))
        }
    };
    let stride = cur.u8("conv stride")? as u32;
    let in_c = cur.u32("conv input channels")? as usize;
    let out_c = cur.u32("conv output channels")? as usize;
    if mode != expect.mode || stride != expect.stride || in_c != expect.in_channels || out_c != expect.out_channels {
        return Err(CodecError::UnsupportedFormat(format!(
            "convolution manifest mismatch: stored {mode:?}/{stride}/{in_c}x{out_c}, expected {:?}/{}/{}x{}",
            expect.mode, expect.stride, expect.in_channels, expect.out_channels
        )));
    }
    let count = 27 * in_c * out_c;
    let bytes = cur.take(count * 4, "convolution weights")?;
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let weights = Array3::from_shape_vec((27, in_c, out_c), data)
        .expect("record length checked above");
    ConvParams::new(mode, stride, weights)
        .map_err(|e| CodecError::CorruptPayload(format!("stored convolution invalid: {e}")))
}

fn read_norm(cur: &mut Cursor<'_>, expect_channels: usize) -> Result<NormParams, CodecError> {
    let channels = cur.u32("norm channels")? as usize;
    if channels != expect_channels {
        return Err(CodecError::UnsupportedFormat(format!(
            "normalization manifest mismatch: stored {channels} channels, expected {expect_channels}"
        )));
    }
    let eps = cur.f32("norm epsilon")?;
    let mut arrays = [const { Vec::new() }; 4];
    for arr in &mut arrays {
        let bytes = cur.take(channels * 4, "normalization array")?;
        *arr = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
    }
    let [gamma, beta, mean, var] = arrays;
    NormParams::new(gamma, beta, mean, var, eps)
        .map_err(|e| CodecError::CorruptPayload(format!("stored normalization invalid: {e}")))
}

/// Parses an encoded weights container, validating its structure against the
/// architecture implied by the header's seed and input channel count.
pub fn decode_weights(bytes: &[u8]) -> Result<BackboneWeights, CodecError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != WEIGHTS_MAGIC {
        return Err(CodecError::UnsupportedFormat(format!(
            "bad weights magic {magic:02x?}"
        )));
    }
    let version = cur.u8("version")?;
    if version != WEIGHTS_VERSION {
        return Err(CodecError::UnsupportedFormat(format!(
            "unknown weights version {version}"
        )));
    }
    let seed = cur.u64("seed")?;
    let in_channels = cur.u32("input channels")? as usize;
    if !(1..=16).contains(&in_channels) {
        return Err(CodecError::UnsupportedFormat(format!(
            "implausible input channel count {in_channels}"
        )));
    }
    let mut skeleton = init_weights(seed, in_channels);
    let block_count = cur.u32("block count")? as usize;
    {
        let mut blocks = skeleton.blocks_mut();
        if block_count != blocks.len() {
            return Err(CodecError::UnsupportedFormat(format!(
                "weights manifest lists {block_count} blocks, architecture has {}",
                blocks.len()
            )));
        }
        for b in blocks.iter_mut() {
            let loaded = ConvBlockParams::new(
                read_conv(&mut cur, &b.conv1)?,
                read_norm(&mut cur, b.out_channels())?,
                read_conv(&mut cur, &b.conv2)?,
                read_norm(&mut cur, b.out_channels())?,
                read_conv(&mut cur, &b.conv3)?,
                read_norm(&mut cur, b.out_channels())?,
            )
            .map_err(|e| CodecError::CorruptPayload(format!("stored block invalid: {e}")))?;
            **b = loaded;
        }
    }
    if cur.pos != bytes.len() {
        return Err(CodecError::CorruptPayload(format!(
            "{} trailing bytes after weights",
            bytes.len() - cur.pos
        )));
    }
    Ok(skeleton)
}

pub fn save_weights(w: &BackboneWeights, path: &Path) -> Result<(), CodecError> {
    std::fs::write(path, encode_weights(w))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<BackboneWeights, CodecError> {
    decode_weights(&std::fs::read(path)?)
}

/// Serializes a BEV map: magic, width, height, z extent, fused channels,
/// seed, then the dense feature volume in (x, y, channel) row-major order.
pub fn encode_bev(bev: &BevMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + bev.data.len() * 4);
    out.extend_from_slice(&BEV_MAGIC);
    out.extend_from_slice(&bev.width.to_le_bytes());
    out.extend_from_slice(&bev.height.to_le_bytes());
    out.extend_from_slice(&bev.z_extent.to_le_bytes());
    out.extend_from_slice(&bev.fused_channels.to_le_bytes());
    out.extend_from_slice(&bev.seed.to_le_bytes());
    for v in bev.data.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_bev(bytes: &[u8]) -> Result<BevMap, CodecError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != BEV_MAGIC {
        return Err(CodecError::UnsupportedFormat(format!(
            "bad BEV magic {magic:02x?}"
        )));
    }
    let width = cur.u32("width")?;
    let height = cur.u32("height")?;
    let z_extent = cur.u32("z extent")?;
    let fused_channels = cur.u32("channels")?;
    let seed = cur.u64("seed")?;
    let count = width as usize * height as usize * z_extent as usize * fused_channels as usize;
    let data_bytes = cur.take(count * 4, "BEV data")?;
    if cur.pos != bytes.len() {
        return Err(CodecError::CorruptPayload(format!(
            "{} trailing bytes after BEV data",
            bytes.len() - cur.pos
        )));
    }
    let data: Vec<f32> = data_bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let data = Array3::from_shape_vec(
        (
            width as usize,
            height as usize,
            z_extent as usize * fused_channels as usize,
        ),
        data,
    )
    .expect("length checked above");
    Ok(BevMap {
        width,
        height,
        z_extent,
        fused_channels,
        seed,
        data,
    })
}

pub fn write_bev(bev: &BevMap, path: &Path) -> Result<(), CodecError> {
    std::fs::write(path, encode_bev(bev))?;
    Ok(())
}

pub fn read_bev(path: &Path) -> Result<BevMap, CodecError> {
    decode_bev(&std::fs::read(path)?)
}
