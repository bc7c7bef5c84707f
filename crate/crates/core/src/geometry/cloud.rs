use nalgebra::Vector3;

use super::FrameId;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-6;

/// Ordered 3-D points in millimeters with optional unit normals, tagged with
/// the frame they are expressed in.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    frame: FrameId,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, frame: FrameId) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self { points, normals: None, frame })
    }

    pub fn with_normals(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>, frame: FrameId) -> Result<Self> {
        check_finite(&points)?;
        if normals.len() != points.len() {
            return Err(Error::InvalidInput(format!("{} normals for {} points", normals.len(), points.len())));
        }
        if let Some(i) = normals.iter().position(|n| !((n.norm() - 1.0).abs() <= UNIT_TOL)) {
            return Err(Error::InvalidInput(format!("normal {i} is not unit length")));
        }
        Ok(Self { points, normals: Some(normals), frame })
    }

    pub fn empty(frame: FrameId) -> Self {
        Self { points: Vec::new(), normals: None, frame }
    }

    pub(crate) fn from_parts_unchecked(
        points: Vec<Vector3<f64>>,
        normals: Option<Vec<Vector3<f64>>>,
        frame: FrameId,
    ) -> Self {
        Self { points, normals, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn frame(&self) -> FrameId {
        self.frame
    }

    /// Same data reinterpreted in another frame (no coordinate change).
    pub fn relabel(mut self, frame: FrameId) -> Self {
        self.frame = frame;
        self
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn into_points(self) -> Vec<Vector3<f64>> {
        self.points
    }

    /// Sub-cloud with the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let normals = self.normals.as_ref().map(|ns| indices.iter().map(|&i| ns[i]).collect());
        Self::from_parts_unchecked(points, normals, self.frame)
    }

    /// Keeps the points for which `keep` returns true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Vector3<f64>) -> bool) -> PointCloud {
        let indices: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.points[i])).collect();
        self.select(&indices)
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }
}

fn check_finite(points: &[Vector3<f64>]) -> Result<()> {
    match points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        Some(i) => Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate"))),
        None => Ok(()),
    }
}
