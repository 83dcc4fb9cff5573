use nalgebra::{Matrix3, Vector3};

use super::GridError;

/// Tolerance for the orthonormality check on poses built from `f64` data.
const ORTHONORMAL_TOL: f64 = 1e-9;

/// Looser tolerance for poses reconstructed from `f32` wire data.
const WIRE_ORTHONORMAL_TOL: f64 = 1e-4;

/// A rigid transform: rotation followed by translation, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    /// Builds a pose, rejecting rotations that are not orthonormal with
    /// determinant +1 within `1e-9`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GridError> {
        Self::checked(rotation, translation, ORTHONORMAL_TOL)
    }

    /// Builds a pose from wire-precision (`f32`) components. The
    /// orthonormality check is relaxed to match the reduced precision.
    pub fn from_wire(rotation: [f32; 9], translation: [f32; 3]) -> Result<Self, GridError> {
        let r = Matrix3::from_row_slice(&rotation.map(f64::from));
        let t = Vector3::from(translation.map(f64::from));
        Self::checked(r, t, WIRE_ORTHONORMAL_TOL)
    }

    fn checked(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tolerance: f64,
    ) -> Result<Self, GridError> {
        let gram = rotation * rotation.transpose();
        let mut deviation = (rotation.determinant() - 1.0).abs();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((gram[(i, j)] - expect).abs());
            }
        }
        if !deviation.is_finite() || deviation > tolerance {
            return Err(GridError::InvalidRotation { deviation, tolerance });
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pure translation.
    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Rotation about the z axis by `yaw` radians, then translation.
    pub fn from_yaw_translation(yaw: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self { rotation, translation }
    }

    /// `self` applied after `other`: `(self ∘ other)(p) = self(other(p))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rotation = self.rotation.transpose();
        Pose {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The transform mapping coordinates in `other`'s frame into `self`'s
    /// frame, given both poses expressed in a common frame.
    pub fn relative_to(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    /// Rotation in row-major order followed by translation, narrowed to the
    /// wire precision.
    pub fn to_wire(&self) -> ([f32; 9], [f32; 3]) {
        let mut r = [0f32; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[i * 3 + j] = self.rotation[(i, j)] as f32;
            }
        }
        let t = [
            self.translation.x as f32,
            self.translation.y as f32,
            self.translation.z as f32,
        ];
        (r, t)
    }

    /// Rotation in row-major order followed by translation at full
    /// precision, for text serialization.
    pub fn to_wire_f64(&self) -> ([f64; 9], [f64; 3]) {
        let mut r = [0f64; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[i * 3 + j] = self.rotation[(i, j)];
            }
        }
        let t = [self.translation.x, self.translation.y, self.translation.z];
        (r, t)
    }

    /// Inverse of [`Pose::to_wire_f64`], with the strict orthonormality
    /// check.
    pub fn from_wire_f64(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self, GridError> {
        Self::new(Matrix3::from_row_slice(&rotation), Vector3::from(translation))
    }

    /// Quantizes every component to the nearest `f32`. Messages carry poses
    /// at this precision so that encode/decode round-trips bitwise.
    pub fn to_wire_precision(&self) -> Pose {
        let (r, t) = self.to_wire();
        Pose {
            rotation: Matrix3::from_row_slice(&r.map(f64::from)),
            translation: Vector3::from(t.map(f64::from)),
        }
    }

    /// Planar (x-y) distance between the translations of two poses.
    pub fn planar_distance(&self, other: &Pose) -> f64 {
        let dx = self.translation.x - other.translation.x;
        let dy = self.translation.y - other.translation.y;
        (dx * dx + dy * dy).sqrt()
    }
}
