//! Geometric foundation: grid specifications, point clouds, voxelization,
//! voxel features, rigid transforms, and grid merging.

mod points;
mod pose;
mod spec;
mod voxel;

pub use points::{
    read_point_cloud, read_point_cloud_file, write_point_cloud, write_point_cloud_file, Point,
    PointCloud, POINT_CLOUD_MAGIC,
};
pub use pose::Pose;
pub use spec::{derive_dims, GridSpec, Level, LevelSpecs, DEFAULT_EXTENT, DEFAULT_ORIGIN};
pub use voxel::{
    center_features, mean_features, merge_grids, regrid, voxelize, voxelize_with_stats,
    SparseVoxelGrid, VoxelizeStats,
};

use thiserror::Error;

/// Errors raised by grid construction and grid algebra.
#[derive(Debug, Error)]
pub enum GridError {
    /// An extent is not an integer multiple of the voxel size.
    #[error("extent {extent} on axis {axis} is not divisible by voxel size {voxel_size}")]
    DimensionMismatch {
        axis: usize,
        extent: f64,
        voxel_size: f64,
    },
    /// A grid-spec field is non-positive or otherwise unusable.
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    /// An operation combining grids received grids with different specs.
    #[error("grid specs do not match: {0}")]
    SpecMismatch(String),
    /// Grids with incompatible feature layouts were combined.
    #[error("feature layouts do not match: {0}")]
    FeatureMismatch(String),
    /// A rotation matrix failed the orthonormality check.
    #[error("rotation is not orthonormal within {tolerance}: max deviation {deviation}")]
    InvalidRotation { deviation: f64, tolerance: f64 },
    /// A point cloud contained NaN or infinite coordinates.
    #[error("point {index} has a non-finite component")]
    NonFinitePoint { index: usize },
}
