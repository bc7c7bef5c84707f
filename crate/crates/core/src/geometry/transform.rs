use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{project_to_so3, FrameId, PointCloud};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid motion mapping coordinates expressed in `from` into `to`.
///
/// Translations are in millimeters. A transform `T: to <- from` maps a point
/// `x` to `R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    from: FrameId,
    to: FrameId,
}

impl RigidTransform {
    /// Builds a transform, checking that `rotation` is a proper rotation
    /// (orthonormal to 1e-9 per entry, determinant +1).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, from: FrameId, to: FrameId) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite transform entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput("rotation block is not a proper orthonormal matrix".into()));
        }
        Ok(Self { rotation, translation, from, to })
    }

    /// Like [`RigidTransform::new`] but snaps a nearly orthonormal matrix onto
    /// SO(3). Matrices further than `tolerance` (max entry of `RᵀR - I`) from
    /// orthonormal are rejected.
    pub fn new_projected(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from: FrameId,
        to: FrameId,
        tolerance: f64,
    ) -> Result<Self> {
        if !rotation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite rotation entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > tolerance || rotation.determinant() <= 0.0 {
            return Err(Error::InvalidInput("rotation block is not close to a proper rotation".into()));
        }
        Self::new(project_to_so3(&rotation), translation, from, to)
    }

    pub(crate) fn from_parts_unchecked(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from: FrameId,
        to: FrameId,
    ) -> Self {
        Self { rotation, translation, from, to }
    }

    pub fn identity(from: FrameId, to: FrameId) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), Vector3::zeros(), from, to)
    }

    pub fn from_translation(translation: Vector3<f64>, from: FrameId, to: FrameId) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), translation, from, to)
    }

    /// Rotation of `angle_rad` about `axis` followed by `translation`.
    pub fn from_axis_angle(
        axis: &Vector3<f64>,
        angle_rad: f64,
        translation: Vector3<f64>,
        from: FrameId,
        to: FrameId,
    ) -> Self {
        let rotation = if axis.norm() > 0.0 {
            *Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle_rad).matrix()
        } else {
            Matrix3::identity()
        };
        Self::from_parts_unchecked(rotation, translation, from, to)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn from_frame(&self) -> FrameId {
        self.from
    }

    pub fn to_frame(&self) -> FrameId {
        self.to
    }

    /// Same motion relabelled with new frames.
    pub fn with_frames(&self, from: FrameId, to: FrameId) -> Self {
        Self { from, to, ..*self }
    }

    /// `self ∘ other`: applies `other` first. Requires `self.from == other.to`.
    pub fn compose(&self, other: &RigidTransform) -> Result<RigidTransform> {
        if self.from != other.to {
            return Err(Error::FrameMismatch { expected: self.from, found: other.to });
        }
        Ok(Self::from_parts_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
            other.from,
            self.to,
        ))
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self::from_parts_unchecked(rt, -(rt * self.translation), self.to, self.from)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Maps every point (and normal) of `cloud`, which must live in `self.from`.
    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        if cloud.frame() != self.from {
            return Err(Error::FrameMismatch { expected: self.from, found: cloud.frame() });
        }
        let points = cloud.points().iter().map(|p| self.transform_point(p)).collect();
        let normals = cloud.normals().map(|ns| ns.iter().map(|n| self.transform_vector(n)).collect());
        Ok(PointCloud::from_parts_unchecked(points, normals, self.to))
    }

    /// Homogeneous 4×4 matrix.
    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major 4×4 entries.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix4();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
        out
    }

    /// Parses row-major 4×4 entries; the bottom row must be `0 0 0 1`.
    pub fn from_row_major(values: &[f64], from: FrameId, to: FrameId) -> Result<Self> {
        let (rotation, translation) = split_row_major(values)?;
        Self::new(rotation, translation, from, to)
    }

    /// Row-major parse with SO(3) projection, for poses typed or exported with
    /// limited precision.
    pub fn from_row_major_projected(values: &[f64], from: FrameId, to: FrameId, tolerance: f64) -> Result<Self> {
        let (rotation, translation) = split_row_major(values)?;
        Self::new_projected(rotation, translation, from, to, tolerance)
    }
}

fn split_row_major(values: &[f64]) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    if values.len() != 16 {
        return Err(Error::InvalidInput(format!("pose needs 16 row-major values, got {}", values.len())));
    }
    let bottom = &values[12..16];
    if bottom != [0.0, 0.0, 0.0, 1.0] {
        return Err(Error::InvalidInput(format!("pose bottom row must be 0 0 0 1, got {bottom:?}")));
    }
    let rotation = Matrix3::new(
        values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9], values[10],
    );
    let translation = Vector3::new(values[3], values[7], values[11]);
    Ok((rotation, translation))
}

/// Geodesic angle between the rotations of two transforms, in degrees.
pub fn rotation_geodesic_deg(a: &RigidTransform, b: &RigidTransform) -> Result<f64> {
    if a.from != b.from {
        return Err(Error::FrameMismatch { expected: a.from, found: b.from });
    }
    if a.to != b.to {
        return Err(Error::FrameMismatch { expected: a.to, found: b.to });
    }
    Ok(rotation_angle_deg(&(a.rotation.transpose() * b.rotation)))
}

/// Rotation angle of a rotation matrix, in degrees within `[0, 180]`.
pub fn rotation_angle_deg(r: &Matrix3<f64>) -> f64 {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos is ill-conditioned near 0; use the skew part for small angles.
    if cos > 0.999 {
        let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
        let sin = 0.5 * skew.norm();
        return sin.atan2(cos).to_degrees().clamp(0.0, 180.0);
    }
    cos.acos().to_degrees()
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    from: FrameId,
    to: FrameId,
    /// Row-major homogeneous matrix, millimeters.
    matrix: [f64; 16],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRecord { from: self.from, to: self.to, matrix: self.to_row_major() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let record = PoseRecord::deserialize(deserializer)?;
        RigidTransform::from_row_major(&record.matrix, record.from, record.to).map_err(serde::de::Error::custom)
    }
}
