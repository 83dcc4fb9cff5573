use super::GridError;

/// The three exchangeable grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    High,
    Medium,
    Low,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::High, Level::Medium, Level::Low];

    /// Voxel edge lengths in meters along x/y/z.
    pub fn voxel_size(self) -> [f64; 3] {
        match self {
            Level::High => [0.05, 0.05, 0.10],
            Level::Medium => [0.10, 0.10, 0.20],
            Level::Low => [0.20, 0.20, 0.40],
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Level::High => 0,
            Level::Medium => 1,
            Level::Low => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Level> {
        match v {
            0 => Some(Level::High),
            1 => Some(Level::Medium),
            2 => Some(Level::Low),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::High => "high",
            Level::Medium => "medium",
            Level::Low => "low",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Level::High),
            "medium" => Ok(Level::Medium),
            "low" => Ok(Level::Low),
            other => Err(format!("unknown level `{other}` (expected high|medium|low)")),
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Default sensing volume: 280 m x 80 m x 4 m centered laterally on the ego,
/// starting 3 m below the sensor.
pub const DEFAULT_EXTENT: [f64; 3] = [280.0, 80.0, 4.0];
pub const DEFAULT_ORIGIN: [f32; 3] = [-140.0, -40.0, -3.0];

/// Computes integer voxel counts for a volume.
///
/// The extent must be an exact integer multiple of the voxel size within a
/// relative tolerance of `1e-9` on each axis.
pub fn derive_dims(extent: [f64; 3], voxel_size: [f64; 3]) -> Result<[u32; 3], GridError> {
    let mut dims = [0u32; 3];
    for axis in 0..3 {
        let (e, v) = (extent[axis], voxel_size[axis]);
        if !(e > 0.0 && v > 0.0) || !e.is_finite() || !v.is_finite() {
            return Err(GridError::InvalidSpec(format!(
                "extent and voxel size must be positive, got {e} / {v} on axis {axis}"
            )));
        }
        let ratio = e / v;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(GridError::DimensionMismatch {
                axis,
                extent: e,
                voxel_size: v,
            });
        }
        dims[axis] = n as u32;
    }
    Ok(dims)
}

/// A uniform voxel partitioning of a box volume.
///
/// Geometry fields are stored at `f32` (wire) precision and widened to `f64`
/// for arithmetic, so that a spec survives encode/decode bitwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Minimum corner of the grid volume, meters.
    pub origin: [f32; 3],
    /// Voxel edge lengths, meters.
    pub voxel_size: [f32; 3],
    /// Voxel counts along x/y/z.
    pub dims: [u32; 3],
    pub level: Level,
}

impl GridSpec {
    /// Spec for `level` over an explicit volume. Fails if the extent is not
    /// divisible by the level's voxel size.
    pub fn for_volume(level: Level, origin: [f32; 3], extent: [f64; 3]) -> Result<Self, GridError> {
        let voxel_size = level.voxel_size();
        let dims = derive_dims(extent, voxel_size)?;
        Ok(Self {
            origin,
            voxel_size: voxel_size.map(|v| v as f32),
            dims,
            level,
        })
    }

    /// The default evaluation volume at `level`: 5600x1600x40, 2800x800x20,
    /// or 1400x400x10 voxels.
    pub fn canonical(level: Level) -> Self {
        Self::for_volume(level, DEFAULT_ORIGIN, DEFAULT_EXTENT)
            .expect("default volume is divisible by all level voxel sizes")
    }

    pub fn origin_f64(&self) -> [f64; 3] {
        self.origin.map(f64::from)
    }

    pub fn voxel_size_f64(&self) -> [f64; 3] {
        self.voxel_size.map(f64::from)
    }

    pub fn voxel_count_capacity(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }

    /// Center of voxel `coord`, meters.
    pub fn voxel_center(&self, coord: [u32; 3]) -> [f64; 3] {
        let o = self.origin_f64();
        let v = self.voxel_size_f64();
        [
            o[0] + (coord[0] as f64 + 0.5) * v[0],
            o[1] + (coord[1] as f64 + 0.5) * v[1],
            o[2] + (coord[2] as f64 + 0.5) * v[2],
        ]
    }

    /// Voxel index containing point `p`, or `None` when outside the volume.
    /// Intervals are half-open in the grid's own geometry, which uses the
    /// stored `f32` sizes widened to `f64`: a nominal decimal boundary such
    /// as an exact multiple of 0.05 may fall in either adjacent cell
    /// depending on how the size rounded, but every participant that decodes
    /// the same spec buckets points identically.
    pub fn voxel_of(&self, p: [f64; 3]) -> Option<[u32; 3]> {
        let o = self.origin_f64();
        let v = self.voxel_size_f64();
        let mut coord = [0u32; 3];
        for axis in 0..3 {
            let idx = ((p[axis] - o[axis]) / v[axis]).floor();
            if idx < 0.0 || idx >= self.dims[axis] as f64 {
                return None;
            }
            coord[axis] = idx as u32;
        }
        Some(coord)
    }
}

/// The three aligned per-level specs over one volume, as used by the fusion
/// backbone. High dims are twice medium and four times low on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpecs {
    pub high: GridSpec,
    pub medium: GridSpec,
    pub low: GridSpec,
}

impl LevelSpecs {
    pub fn new(origin: [f32; 3], extent: [f64; 3]) -> Result<Self, GridError> {
        let high = GridSpec::for_volume(Level::High, origin, extent)?;
        let medium = GridSpec::for_volume(Level::Medium, origin, extent)?;
        let low = GridSpec::for_volume(Level::Low, origin, extent)?;
        for axis in 0..3 {
            if high.dims[axis] != 2 * medium.dims[axis] || medium.dims[axis] != 2 * low.dims[axis] {
                return Err(GridError::InvalidSpec(format!(
                    "level dims are not nested powers of two on axis {axis}: {} / {} / {}",
                    high.dims[axis], medium.dims[axis], low.dims[axis]
                )));
            }
        }
        Ok(Self { high, medium, low })
    }

    pub fn canonical() -> Self {
        Self::new(DEFAULT_ORIGIN, DEFAULT_EXTENT).expect("default volume is valid")
    }

    pub fn get(&self, level: Level) -> &GridSpec {
        match level {
            Level::High => &self.high,
            Level::Medium => &self.medium,
            Level::Low => &self.low,
        }
    }
}
