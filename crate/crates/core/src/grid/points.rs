use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{GridError, Pose};
use crate::codec::CodecError;

/// One LiDAR return: position in the cloud's frame plus reflectance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// A finite point set together with the pose of its sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Sensor frame in world coordinates.
    pub frame_pose: Pose,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, frame_pose: Pose) -> Result<Self, GridError> {
        for (index, p) in points.iter().enumerate() {
            if ![p.x, p.y, p.z, p.intensity].iter().all(|v| v.is_finite()) {
                return Err(GridError::NonFinitePoint { index });
            }
        }
        Ok(Self { points, frame_pose })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-expresses the cloud in the frame of `target`: each position is
    /// rotated then translated by `target.inverse() * frame_pose`, intensity
    /// is unchanged, and the stored frame pose becomes `target`.
    pub fn into_frame(&self, target: &Pose) -> PointCloud {
        let rel = target.inverse().compose(&self.frame_pose);
        let points = self
            .points
            .iter()
            .map(|p| {
                let q = rel.apply(p.position());
                Point::new(q.x, q.y, q.z, p.intensity)
            })
            .collect();
        PointCloud {
            points,
            frame_pose: *target,
        }
    }
}

pub const POINT_CLOUD_MAGIC: [u8; 4] = *b"PCF1";

/// Writes the `PCF1` layout: magic, u32 count, then count records of
/// x/y/z/intensity as little-endian f32.
pub fn write_point_cloud<W: Write>(mut w: W, cloud: &PointCloud) -> Result<(), CodecError> {
    let count = u32::try_from(cloud.points.len())
        .map_err(|_| CodecError::EncodingOverflow("point count exceeds u32".into()))?;
    w.write_all(&POINT_CLOUD_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a `PCF1` stream. The resulting cloud carries `frame_pose`, which the
/// format does not store.
pub fn read_point_cloud<R: Read>(mut r: R, frame_pose: Pose) -> Result<PointCloud, CodecError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| CodecError::TruncatedMessage("missing point cloud magic".into()))?;
    if magic != POINT_CLOUD_MAGIC {
        return Err(CodecError::UnsupportedFormat(format!(
            "bad point cloud magic {magic:02x?}"
        )));
    }
    let mut count_bytes = [0u8; 4];
    r.read_exact(&mut count_bytes)
        .map_err(|_| CodecError::TruncatedMessage("missing point count".into()))?;
    let count = u32::from_le_bytes(count_bytes) as usize;
    let mut body = vec![0u8; count * 16];
    r.read_exact(&mut body)
        .map_err(|_| CodecError::TruncatedMessage("point records truncated".into()))?;
    let mut points = Vec::with_capacity(count);
    for rec in body.chunks_exact(16) {
        let f = |i: usize| f32::from_le_bytes(rec[i..i + 4].try_into().unwrap()) as f64;
        points.push(Point::new(f(0), f(4), f(8), f(12)));
    }
    PointCloud::new(points, frame_pose)
        .map_err(|e| CodecError::CorruptPayload(format!("non-finite point: {e}")))
}

pub fn write_point_cloud_file(path: &Path, cloud: &PointCloud) -> Result<(), CodecError> {
    let mut buf = Vec::with_capacity(8 + cloud.points.len() * 16);
    write_point_cloud(&mut buf, cloud)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_point_cloud_file(path: &Path, frame_pose: Pose) -> Result<PointCloud, CodecError> {
    let bytes = std::fs::read(path)?;
    read_point_cloud(bytes.as_slice(), frame_pose)
}
