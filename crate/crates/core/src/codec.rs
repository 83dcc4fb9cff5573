//! Wire format for exchanged voxel grids and bandwidth accounting.
//!
//! A message is a fixed 107-byte header followed by the voxel payload:
//!
//! ```text
//! magic "SVG1"                      4
//! version (1)                       1
//! mode byte                         1
//! sender id, u32                    4
//! timestamp, u64 microseconds      8
//! sender pose, 9 + 3 f32            48
//! level code                        1
//! grid origin, 3 f32                12
//! voxel size, 3 f32                 12
//! grid dims, 3 u32                  12
//! voxel count, u32                  4
//! ```
//!
//! The mode byte packs two flags: bit 0 set when per-voxel mean features
//! follow the coordinates, bit 1 set when coordinates use the packed u16
//! sublayout (6 bytes per voxel) instead of the compatibility u32 sublayout
//! (12 bytes per voxel). All integers and floats are little endian.

use ndarray::Array2;
use thiserror::Error;

use crate::grid::{GridSpec, Level, Pose, SparseVoxelGrid};

pub const MESSAGE_MAGIC: [u8; 4] = *b"SVG1";
pub const MESSAGE_VERSION: u8 = 1;
pub const MESSAGE_HEADER_BYTES: usize = 107;

/// Bytes per point of the uncompressed x/y/z/intensity f32 baseline.
pub const RAW_POINT_BYTES: u64 = 16;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated message: {0}")]
    TruncatedMessage(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("encoding overflow: {0}")]
    EncodingOverflow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the payload carries per voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadMode {
    CoordsOnly,
    /// Coordinates plus a 4-channel mean feature row per voxel.
    CoordsPlusMeanFeatures,
}

impl PayloadMode {
    pub fn has_features(self) -> bool {
        matches!(self, PayloadMode::CoordsPlusMeanFeatures)
    }
}

impl std::str::FromStr for PayloadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "coords" => Ok(PayloadMode::CoordsOnly),
            "mean" => Ok(PayloadMode::CoordsPlusMeanFeatures),
            other => Err(format!("unknown payload mode `{other}` (expected coords|mean)")),
        }
    }
}

/// Integer width of the coordinate records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sublayout {
    /// 3 x u32 per voxel, 12 bytes.
    Compat,
    /// 3 x u16 per voxel, 6 bytes. Requires dims of at most 65535.
    Packed,
}

impl Sublayout {
    pub fn coord_bytes(self) -> u64 {
        match self {
            Sublayout::Compat => 12,
            Sublayout::Packed => 6,
        }
    }
}

impl std::str::FromStr for Sublayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "compat" => Ok(Sublayout::Compat),
            "packed" => Ok(Sublayout::Packed),
            other => Err(format!("unknown sublayout `{other}` (expected compat|packed)")),
        }
    }
}

/// Payload bytes for `count` voxels, excluding the header.
pub fn payload_size(count: u64, mode: PayloadMode, sublayout: Sublayout) -> u64 {
    let features = if mode.has_features() { 16 * count } else { 0 };
    count * sublayout.coord_bytes() + features
}

/// Bytes of the raw point-cloud baseline for the same frame.
pub fn raw_point_bytes(point_count: u64) -> u64 {
    point_count * RAW_POINT_BYTES
}

/// One grid from one sender at one frame, ready for the wire.
///
/// The pose is held at wire (f32) precision so that encode/decode is exact;
/// the grid's spec doubles as the header geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGridMessage {
    pub sender_id: u32,
    pub timestamp_us: u64,
    pub sender_pose: Pose,
    pub mode: PayloadMode,
    pub sublayout: Sublayout,
    pub grid: SparseVoxelGrid,
}

impl VoxelGridMessage {
    /// Wraps a grid for transmission. The payload mode follows the grid:
    /// feature-less grids send coordinates only, 4-channel grids send mean
    /// features. Other feature widths are not transmissible.
    pub fn new(
        sender_id: u32,
        timestamp_us: u64,
        sender_pose: &Pose,
        grid: SparseVoxelGrid,
        sublayout: Sublayout,
    ) -> Result<Self, CodecError> {
        let mode = match grid.feature_width() {
            None => PayloadMode::CoordsOnly,
            Some(4) => PayloadMode::CoordsPlusMeanFeatures,
            Some(w) => {
                return Err(CodecError::UnsupportedFormat(format!(
                    "only 4-channel mean features are transmissible, got {w}"
                )))
            }
        };
        Ok(Self {
            sender_id,
            timestamp_us,
            sender_pose: sender_pose.to_wire_precision(),
            mode,
            sublayout,
            grid,
        })
    }

    /// Like [`VoxelGridMessage::new`] but with the payload mode chosen by
    /// the caller: requesting `CoordsOnly` on a featured grid drops the
    /// features, requesting features on a bare grid is an error.
    pub fn new_with_mode(
        sender_id: u32,
        timestamp_us: u64,
        sender_pose: &Pose,
        mut grid: SparseVoxelGrid,
        mode: PayloadMode,
        sublayout: Sublayout,
    ) -> Result<Self, CodecError> {
        match mode {
            PayloadMode::CoordsOnly => grid.features = None,
            PayloadMode::CoordsPlusMeanFeatures => {
                if grid.features.is_none() {
                    return Err(CodecError::UnsupportedFormat(
                        "feature payload requested for a grid without features".into(),
                    ));
                }
            }
        }
        Self::new(sender_id, timestamp_us, sender_pose, grid, sublayout)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }

    /// Total message size in bytes: header plus payload.
    pub fn encoded_len(&self) -> u64 {
        MESSAGE_HEADER_BYTES as u64
            + payload_size(self.grid.len() as u64, self.mode, self.sublayout)
    }
}

fn mode_byte(mode: PayloadMode, sublayout: Sublayout) -> u8 {
    (mode.has_features() as u8) | ((matches!(sublayout, Sublayout::Packed) as u8) << 1)
}

/// Serializes a message. Fails with [`CodecError::EncodingOverflow`] when the
/// packed sublayout is requested for a grid with any dimension above 65535.
pub fn encode(msg: &VoxelGridMessage) -> Result<Vec<u8>, CodecError> {
    let spec = msg.grid.spec;
    if msg.sublayout == Sublayout::Packed {
        if let Some(axis) = (0..3).find(|&a| spec.dims[a] > u16::MAX as u32) {
            return Err(CodecError::EncodingOverflow(format!(
                "dim {} on axis {axis} exceeds the packed sublayout's u16 range",
                spec.dims[axis]
            )));
        }
    }
    let count = u32::try_from(msg.grid.len())
        .map_err(|_| CodecError::EncodingOverflow("voxel count exceeds u32".into()))?;

    let mut out = Vec::with_capacity(msg.encoded_len() as usize);
    out.extend_from_slice(&MESSAGE_MAGIC);
    out.push(MESSAGE_VERSION);
    out.push(mode_byte(msg.mode, msg.sublayout));
    out.extend_from_slice(&msg.sender_id.to_le_bytes());
    out.extend_from_slice(&msg.timestamp_us.to_le_bytes());
    let (rotation, translation) = msg.sender_pose.to_wire();
    for v in rotation {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in translation {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(spec.level.as_u8());
    for v in spec.origin {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in spec.voxel_size {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in spec.dims {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&count.to_le_bytes());
    debug_assert_eq!(out.len(), MESSAGE_HEADER_BYTES);

    match msg.sublayout {
        Sublayout::Compat => {
            for c in &msg.grid.coords {
                for v in c {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Sublayout::Packed => {
            for c in &msg.grid.coords {
                for &v in c {
                    out.extend_from_slice(&(v as u16).to_le_bytes());
                }
            }
        }
    }
    if let Some(features) = &msg.grid.features {
        for row in features.rows() {
            for &v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    debug_assert_eq!(out.len() as u64, msg.encoded_len());
    Ok(out)
}

pub(crate) struct Cursor<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::TruncatedMessage(format!(
                "{what}: need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32, CodecError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses and validates a message. Coordinates must be in bounds, sorted,
/// and unique; features must be finite; no trailing bytes are allowed.
pub fn decode(bytes: &[u8]) -> Result<VoxelGridMessage, CodecError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MESSAGE_MAGIC {
        return Err(CodecError::UnsupportedFormat(format!(
            "bad magic {magic:02x?}"
        )));
    }
    let version = cur.u8("version")?;
    if version != MESSAGE_VERSION {
        return Err(CodecError::UnsupportedFormat(format!(
            "unknown version {version}"
        )));
    }
    let mode_byte = cur.u8("mode")?;
    if mode_byte & !0b11 != 0 {
        return Err(CodecError::UnsupportedFormat(format!(
            "unknown mode bits {mode_byte:#04x}"
        )));
    }
    let mode = if mode_byte & 1 != 0 {
        PayloadMode::CoordsPlusMeanFeatures
    } else {
        PayloadMode::CoordsOnly
    };
    let sublayout = if mode_byte & 2 != 0 {
        Sublayout::Packed
    } else {
        Sublayout::Compat
    };
    let sender_id = cur.u32("sender id")?;
    let timestamp_us = cur.u64("timestamp")?;
    let mut rotation = [0f32; 9];
    for v in &mut rotation {
        *v = cur.f32("pose rotation")?;
    }
    let mut translation = [0f32; 3];
    for v in &mut translation {
        *v = cur.f32("pose translation")?;
    }
    let sender_pose = Pose::from_wire(rotation, translation)
        .map_err(|e| CodecError::CorruptPayload(format!("sender pose: {e}")))?;
    let level_code = cur.u8("level")?;
    let level = Level::from_u8(level_code).ok_or_else(|| {
        CodecError::UnsupportedFormat(format!("unknown level code {level_code}"))
    })?;
    let mut origin = [0f32; 3];
    for v in &mut origin {
        *v = cur.f32("origin")?;
    }
    let mut voxel_size = [0f32; 3];
    for v in &mut voxel_size {
        *v = cur.f32("voxel size")?;
    }
    let mut dims = [0u32; 3];
    for v in &mut dims {
        *v = cur.u32("dims")?;
    }
    for axis in 0..3 {
        if dims[axis] == 0 || !voxel_size[axis].is_finite() || voxel_size[axis] <= 0.0 {
            return Err(CodecError::CorruptPayload(format!(
                "invalid geometry on axis {axis}: dim {} voxel size {}",
                dims[axis], voxel_size[axis]
            )));
        }
    }
    let count = cur.u32("voxel count")? as usize;
    debug_assert_eq!(cur.pos, MESSAGE_HEADER_BYTES);

    let spec = GridSpec {
        origin,
        voxel_size,
        dims,
        level,
    };

    let mut coords = Vec::with_capacity(count);
    for i in 0..count {
        let c = match sublayout {
            Sublayout::Compat => [
                cur.u32("coord")?,
                cur.u32("coord")?,
                cur.u32("coord")?,
            ],
            Sublayout::Packed => [
                cur.u16("coord")? as u32,
                cur.u16("coord")? as u32,
                cur.u16("coord")? as u32,
            ],
        };
        for axis in 0..3 {
            if c[axis] >= dims[axis] {
                return Err(CodecError::CorruptPayload(format!(
                    "voxel {i} out of bounds on axis {axis}: {} >= {}",
                    c[axis], dims[axis]
                )));
            }
        }
        if let Some(prev) = coords.last() {
            if *prev >= c {
                return Err(CodecError::CorruptPayload(format!(
                    "voxel {i} breaks sorted-unique order"
                )));
            }
        }
        coords.push(c);
    }
    let features = if mode.has_features() {
        let mut f = Array2::<f32>::zeros((count, 4));
        for i in 0..count {
            for k in 0..4 {
                let v = cur.f32("feature")?;
                if !v.is_finite() {
                    return Err(CodecError::CorruptPayload(format!(
                        "non-finite feature at voxel {i} channel {k}"
                    )));
                }
                f[[i, k]] = v;
            }
        }
        Some(f)
    } else {
        None
    };
    if cur.pos != bytes.len() {
        return Err(CodecError::CorruptPayload(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }

    let grid = SparseVoxelGrid {
        spec,
        coords,
        features,
    };
    Ok(VoxelGridMessage {
        sender_id,
        timestamp_us,
        sender_pose,
        mode,
        sublayout,
        grid,
    })
}

/// Size and rate of one encoded frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeReport {
    pub frame_bytes: u64,
    pub frequency_hz: f64,
    /// Decimal megabits per second: bytes * 8 * frequency / 1e6.
    pub bandwidth_mbps: f64,
}

impl SizeReport {
    /// The reported rate truncated (not rounded) to one decimal. A tiny
    /// guard keeps exact tenths computed in floating point from truncating
    /// one step down.
    pub fn display_mbps(&self) -> String {
        format!("{:.1}", truncate_tenths(self.bandwidth_mbps))
    }

    pub fn display_kb(&self) -> String {
        format!("{:.1}", truncate_tenths(self.frame_bytes as f64 / 1000.0))
    }
}

pub fn truncate_tenths(v: f64) -> f64 {
    (v * 10.0 + 1e-9).floor() / 10.0
}

/// Bandwidth of sending `frame_bytes` at `frequency_hz`.
pub fn bandwidth(frame_bytes: u64, frequency_hz: f64) -> SizeReport {
    SizeReport {
        frame_bytes,
        frequency_hz,
        bandwidth_mbps: frame_bytes as f64 * 8.0 * frequency_hz / 1e6,
    }
}
