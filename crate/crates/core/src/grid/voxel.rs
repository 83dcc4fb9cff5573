use std::collections::BTreeMap;

use ndarray::Array2;

use super::{GridError, GridSpec, PointCloud, Pose};

/// Occupied voxels of one grid, in one sensor frame.
///
/// Coordinates are unique and sorted lexicographically (x, then y, then z).
/// `features` is either absent or an `(n, f)` matrix row-aligned with
/// `coords`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoxelGrid {
    pub spec: GridSpec,
    pub coords: Vec<[u32; 3]>,
    pub features: Option<Array2<f32>>,
}

impl SparseVoxelGrid {
    /// Builds a coordinate-only grid from possibly unsorted, possibly
    /// duplicated voxel indices.
    pub fn from_coords(spec: GridSpec, mut coords: Vec<[u32; 3]>) -> Result<Self, GridError> {
        for c in &coords {
            check_bounds(&spec, *c)?;
        }
        coords.sort_unstable();
        coords.dedup();
        Ok(Self {
            spec,
            coords,
            features: None,
        })
    }

    /// Builds a grid from already sorted, unique coordinates with row-aligned
    /// features.
    pub fn with_features(
        spec: GridSpec,
        coords: Vec<[u32; 3]>,
        features: Array2<f32>,
    ) -> Result<Self, GridError> {
        if features.nrows() != coords.len() {
            return Err(GridError::FeatureMismatch(format!(
                "{} feature rows for {} voxels",
                features.nrows(),
                coords.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            check_bounds(&spec, *c)?;
            if i > 0 && coords[i - 1] >= *c {
                return Err(GridError::InvalidSpec(
                    "voxel coordinates must be sorted and unique".into(),
                ));
            }
        }
        Ok(Self {
            spec,
            coords,
            features: Some(features),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn feature_width(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.ncols())
    }
}

fn check_bounds(spec: &GridSpec, c: [u32; 3]) -> Result<(), GridError> {
    for axis in 0..3 {
        if c[axis] >= spec.dims[axis] {
            return Err(GridError::InvalidSpec(format!(
                "voxel index {} out of range on axis {axis} (dims {:?})",
                c[axis], spec.dims
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelizeStats {
    pub points_total: usize,
    /// Points inside the half-open grid volume.
    pub points_kept: usize,
    pub voxel_count: usize,
}

/// Discretizes a cloud into occupied voxel coordinates. Points outside the
/// volume are dropped.
pub fn voxelize(cloud: &PointCloud, spec: &GridSpec) -> SparseVoxelGrid {
    voxelize_with_stats(cloud, spec).0
}

pub fn voxelize_with_stats(cloud: &PointCloud, spec: &GridSpec) -> (SparseVoxelGrid, VoxelizeStats) {
    let mut coords = Vec::with_capacity(cloud.points.len());
    for p in &cloud.points {
        if let Some(c) = spec.voxel_of([p.x, p.y, p.z]) {
            coords.push(c);
        }
    }
    let points_kept = coords.len();
    coords.sort_unstable();
    coords.dedup();
    let stats = VoxelizeStats {
        points_total: cloud.points.len(),
        points_kept,
        voxel_count: coords.len(),
    };
    (
        SparseVoxelGrid {
            spec: *spec,
            coords,
            features: None,
        },
        stats,
    )
}

/// Attaches the 3-channel voxel-center position feature to each coordinate.
pub fn center_features(grid: &SparseVoxelGrid) -> SparseVoxelGrid {
    let mut features = Array2::<f32>::zeros((grid.coords.len(), 3));
    for (i, &c) in grid.coords.iter().enumerate() {
        let center = grid.spec.voxel_center(c);
        for axis in 0..3 {
            features[[i, axis]] = center[axis] as f32;
        }
    }
    SparseVoxelGrid {
        spec: grid.spec,
        coords: grid.coords.clone(),
        features: Some(features),
    }
}

/// Voxelizes a cloud and attaches the 4-channel mean of the contained points
/// (x, y, z, intensity). Means accumulate in `f64` in input-point order.
pub fn mean_features(cloud: &PointCloud, spec: &GridSpec) -> SparseVoxelGrid {
    let mut groups: BTreeMap<[u32; 3], ([f64; 4], u64)> = BTreeMap::new();
    for p in &cloud.points {
        if let Some(c) = spec.voxel_of([p.x, p.y, p.z]) {
            let entry = groups.entry(c).or_insert(([0.0; 4], 0));
            entry.0[0] += p.x;
            entry.0[1] += p.y;
            entry.0[2] += p.z;
            entry.0[3] += p.intensity;
            entry.1 += 1;
        }
    }
    let mut coords = Vec::with_capacity(groups.len());
    let mut features = Array2::<f32>::zeros((groups.len(), 4));
    for (i, (c, (sums, n))) in groups.into_iter().enumerate() {
        coords.push(c);
        for k in 0..4 {
            features[[i, k]] = (sums[k] / n as f64) as f32;
        }
    }
    SparseVoxelGrid {
        spec: *spec,
        coords,
        features: Some(features),
    }
}

/// Re-expresses a grid in another frame and resolution: voxel centers are
/// mapped through `relative_pose` (source frame into target frame) and
/// re-discretized under `target`. Feature rows follow their voxel; when two
/// source voxels land in one target cell their features combine element-wise
/// by maximum, matching [`merge_grids`].
pub fn regrid(
    grid: &SparseVoxelGrid,
    target: &GridSpec,
    relative_pose: &Pose,
) -> SparseVoxelGrid {
    match &grid.features {
        None => {
            let mut coords = Vec::with_capacity(grid.coords.len());
            for &c in &grid.coords {
                let center = grid.spec.voxel_center(c);
                let q = relative_pose.apply(nalgebra::Vector3::new(center[0], center[1], center[2]));
                if let Some(t) = target.voxel_of([q.x, q.y, q.z]) {
                    coords.push(t);
                }
            }
            coords.sort_unstable();
            coords.dedup();
            SparseVoxelGrid {
                spec: *target,
                coords,
                features: None,
            }
        }
        Some(features) => {
            let width = features.ncols();
            let mut cells: BTreeMap<[u32; 3], Vec<f32>> = BTreeMap::new();
            for (i, &c) in grid.coords.iter().enumerate() {
                let center = grid.spec.voxel_center(c);
                let q = relative_pose.apply(nalgebra::Vector3::new(center[0], center[1], center[2]));
                if let Some(t) = target.voxel_of([q.x, q.y, q.z]) {
                    let row = features.row(i);
                    cells
                        .entry(t)
                        .and_modify(|acc| {
                            for k in 0..width {
                                acc[k] = acc[k].max(row[k]);
                            }
                        })
                        .or_insert_with(|| row.to_vec());
                }
            }
            let mut coords = Vec::with_capacity(cells.len());
            let mut out = Array2::<f32>::zeros((cells.len(), width));
            for (i, (c, row)) in cells.into_iter().enumerate() {
                coords.push(c);
                for k in 0..width {
                    out[[i, k]] = row[k];
                }
            }
            SparseVoxelGrid {
                spec: *target,
                coords,
                features: Some(out),
            }
        }
    }
}

/// Unions grids that share one spec. Occupancy is the set union; features,
/// when present on all inputs, combine element-wise by maximum. Mixing grids
/// with and without features is an error.
pub fn merge_grids(grids: &[&SparseVoxelGrid]) -> Result<SparseVoxelGrid, GridError> {
    let first = grids.first().ok_or_else(|| {
        GridError::InvalidSpec("cannot merge an empty list of grids".into())
    })?;
    let spec = first.spec;
    let width = first.feature_width();
    for g in grids {
        if g.spec != spec {
            return Err(GridError::SpecMismatch(format!(
                "{:?} vs {:?}",
                g.spec, spec
            )));
        }
        if g.feature_width() != width {
            return Err(GridError::FeatureMismatch(format!(
                "{:?} vs {:?} feature channels",
                g.feature_width(),
                width
            )));
        }
    }
    match width {
        None => {
            let mut coords: Vec<[u32; 3]> = grids.iter().flat_map(|g| g.coords.iter().copied()).collect();
            coords.sort_unstable();
            coords.dedup();
            Ok(SparseVoxelGrid {
                spec,
                coords,
                features: None,
            })
        }
        Some(width) => {
            let mut cells: BTreeMap<[u32; 3], Vec<f32>> = BTreeMap::new();
            for g in grids {
                let features = g.features.as_ref().unwrap();
                for (i, &c) in g.coords.iter().enumerate() {
                    let row = features.row(i);
                    cells
                        .entry(c)
                        .and_modify(|acc| {
                            for k in 0..width {
                                acc[k] = acc[k].max(row[k]);
                            }
                        })
                        .or_insert_with(|| row.to_vec());
                }
            }
            let mut coords = Vec::with_capacity(cells.len());
            let mut out = Array2::<f32>::zeros((cells.len(), width));
            for (i, (c, row)) in cells.into_iter().enumerate() {
                coords.push(c);
                for k in 0..width {
                    out[[i, k]] = row[k];
                }
            }
            Ok(SparseVoxelGrid {
                spec,
                coords,
                features: Some(out),
            })
        }
    }
}
