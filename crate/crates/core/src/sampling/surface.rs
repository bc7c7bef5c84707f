use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::{FrameId, PointCloud};

/// Draws `n` points uniformly by area over the mesh surface. Each point
/// carries its triangle's face normal. Output frame is [`FrameId::ModelCt`].
pub fn uniform_surface_sample(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.triangles().len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles().len() {
        acc += mesh.area(t);
        cdf.push(acc);
    }
    let total = acc;
    let normals: Vec<Vector3<f64>> = (0..mesh.triangles().len()).map(|t| mesh.face_normal(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut point_normals = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let t = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        let [a, b, c] = mesh.corners(t);
        let s = rng.random::<f64>().sqrt();
        let r = rng.random::<f64>();
        points.push(a * (1.0 - s) + b * (s * (1.0 - r)) + c * (s * r));
        point_normals.push(normals[t]);
    }
    PointCloud::with_normals(points, point_normals, FrameId::ModelCt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_stays_in_plane_and_inside() {
        let v = vec![Vector3::new(0.0, 0.0, 2.0), Vector3::new(3.0, 0.0, 2.0), Vector3::new(0.0, 4.0, 2.0)];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap().mesh;
        let cloud = uniform_surface_sample(&mesh, 1000, 1).unwrap();
        for p in cloud.points() {
            assert!((p.z - 2.0).abs() < 1e-9);
            assert!(p.x >= -1e-12 && p.y >= -1e-12 && p.x / 3.0 + p.y / 4.0 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn area_weighting_follows_binomial() {
        // Areas 9:1. Expected 9000 of 10,000 in the large one, σ = sqrt(n p (1-p)) = 30.
        let v = vec![
            Vector3::zeros(),
            Vector3::new(3.0, 0.0, 0.0),
            Vector3::new(0.0, 3.0, 0.0),
            Vector3::new(10.0, 0.0, 0.0),
            Vector3::new(11.0, 0.0, 0.0),
            Vector3::new(10.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap().mesh;
        let cloud = uniform_surface_sample(&mesh, 10_000, 7).unwrap();
        let large = cloud.points().iter().filter(|p| p.x < 5.0).count() as f64;
        assert!((large - 9000.0).abs() <= 3.0 * 30.0, "large = {large}");
    }

    #[test]
    fn deterministic_per_seed() {
        let v = vec![Vector3::zeros(), Vector3::x(), Vector3::y()];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap().mesh;
        assert_eq!(uniform_surface_sample(&mesh, 50, 3).unwrap(), uniform_surface_sample(&mesh, 50, 3).unwrap());
        assert_ne!(uniform_surface_sample(&mesh, 50, 3).unwrap(), uniform_surface_sample(&mesh, 50, 4).unwrap());
    }
}
