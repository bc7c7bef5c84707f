use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Replaces the points of each occupied voxel by their centroid.
///
/// The grid is anchored at the cloud's axis-aligned minimum corner and the
/// output is ordered by lexicographic voxel key. Normals, when present, are
/// averaged and renormalized.
pub fn voxel_downsample(cloud: &PointCloud, voxel_mm: f64) -> Result<PointCloud> {
    if !(voxel_mm > 0.0 && voxel_mm.is_finite()) {
        return Err(Error::InvalidInput(format!("voxel size must be positive, got {voxel_mm}")));
    }
    let Some((origin, _)) = cloud.bounds() else {
        return Ok(cloud.clone());
    };
    struct Cell {
        sum: Vector3<f64>,
        normal_sum: Vector3<f64>,
        first_normal: Vector3<f64>,
        count: usize,
    }
    let mut cells: BTreeMap<[i64; 3], Cell> = BTreeMap::new();
    let normals = cloud.normals();
    for (i, p) in cloud.points().iter().enumerate() {
        let rel = (p - origin) / voxel_mm;
        let key = [rel.x.floor() as i64, rel.y.floor() as i64, rel.z.floor() as i64];
        let n = normals.map_or_else(Vector3::zeros, |ns| ns[i]);
        let cell = cells.entry(key).or_insert(Cell {
            sum: Vector3::zeros(),
            normal_sum: Vector3::zeros(),
            first_normal: n,
            count: 0,
        });
        cell.sum += p;
        cell.normal_sum += n;
        cell.count += 1;
    }
    let points: Vec<_> = cells.values().map(|c| c.sum / c.count as f64).collect();
    if normals.is_some() {
        let ns = cells
            .values()
            .map(|c| {
                let norm = c.normal_sum.norm();
                if norm > 1e-9 {
                    c.normal_sum / norm
                } else {
                    c.first_normal
                }
            })
            .collect();
        PointCloud::with_normals(points, ns, cloud.frame())
    } else {
        PointCloud::new(points, cloud.frame())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;

    #[test]
    fn merges_points_in_one_voxel() {
        let c =
            PointCloud::new(vec![Vector3::new(0.1, 0.0, 0.0), Vector3::new(0.2, 0.0, 0.0)], FrameId::ModelCt).unwrap();
        let out = voxel_downsample(&c, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.points()[0] - Vector3::new(0.15, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sparse_points_survive() {
        let pts: Vec<_> = (0..10).rev().map(|i| Vector3::new(2.0 * i as f64, 0.0, 0.0)).collect();
        let c = PointCloud::new(pts.clone(), FrameId::ModelCt).unwrap();
        let out = voxel_downsample(&c, 1.0).unwrap();
        let mut expect = pts;
        expect.reverse();
        assert_eq!(out.points(), expect.as_slice());
    }

    #[test]
    fn rejects_non_positive_size() {
        let c = PointCloud::new(vec![Vector3::zeros()], FrameId::ModelCt).unwrap();
        assert!(voxel_downsample(&c, 0.0).is_err());
    }
}
