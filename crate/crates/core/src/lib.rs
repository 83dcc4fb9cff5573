//! Multi-resolution sparse voxel grids as an exchangeable environment
//! representation for cooperative LiDAR perception.
//!
//! The crate is organized in five layers:
//!
//! * [`grid`] — grid specifications, point cloud voxelization, voxel
//!   features, rigid transforms, and grid merging.
//! * [`codec`] — the `SVG1` wire format for voxel grid messages plus
//!   message-size and bandwidth accounting.
//! * [`nn`] — a spatially sparse 3D convolution engine: rulebooks,
//!   submanifold and strided sparse convolution, normalization, and the
//!   scatter fusion operation.
//! * [`backbone`] — the multi-resolution fusion backbone wiring three
//!   collective resolution streams and a local stream into a single
//!   bird's-eye-view feature map.
//! * [`sim`] — a simulated V2X exchange with range gating, resolution
//!   assignment strategies, and bandwidth reports.

pub mod backbone;
pub mod codec;
pub mod grid;
pub mod nn;
pub mod sim;

pub use grid::{GridSpec, Level, Point, PointCloud, Pose, SparseVoxelGrid};
pub use nn::SparseTensor;
