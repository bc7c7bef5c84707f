use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NearestNeighborIndex, PointCloud};
use crate::error::{Error, Result};

pub const DEFAULT_NORMAL_K: usize = 30;

/// Neighborhood used for local plane fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// The `k` nearest points (including the point itself).
    Knn(usize),
    /// All points within the radius (mm), capped at `max_neighbors` closest.
    Radius { radius_mm: f64, max_neighbors: usize },
}

impl Default for Neighborhood {
    fn default() -> Self {
        Neighborhood::Knn(DEFAULT_NORMAL_K)
    }
}

/// Per-point normals from k-NN PCA, oriented towards `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Vector3<f64>) -> Result<PointCloud> {
    estimate_normals_with(cloud, Neighborhood::Knn(k), viewpoint)
}

pub fn estimate_normals_with(
    cloud: &PointCloud,
    neighborhood: Neighborhood,
    viewpoint: &Vector3<f64>,
) -> Result<PointCloud> {
    if let Neighborhood::Knn(k) = neighborhood {
        if k < 3 {
            return Err(Error::InvalidInput(format!("normal neighborhood k={k} < 3")));
        }
        if cloud.len() < k {
            return Err(Error::TooFewPoints { needed: k, got: cloud.len() });
        }
    } else if cloud.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: cloud.len() });
    }
    let index = NearestNeighborIndex::new(cloud.points());
    let points = cloud.points();
    let normals: Vec<Vector3<f64>> = points
        .par_iter()
        .map(|p| {
            let neighbors = match neighborhood {
                Neighborhood::Knn(k) => index.knn(p, k),
                Neighborhood::Radius { radius_mm, max_neighbors } => {
                    let mut n = index.within_radius(p, radius_mm);
                    n.truncate(max_neighbors.max(3));
                    n
                }
            };
            let raw =
                if neighbors.len() >= 3 { plane_normal(neighbors.iter().map(|n| &points[n.index])) } else { None };
            let normal = raw.unwrap_or_else(|| {
                let to_view = viewpoint - p;
                if to_view.norm() > 0.0 {
                    to_view.normalize()
                } else {
                    Vector3::z()
                }
            });
            if normal.dot(&(viewpoint - p)) < 0.0 {
                -normal
            } else {
                normal
            }
        })
        .collect();
    PointCloud::with_normals(points.to_vec(), normals, cloud.frame())
}

/// Eigenvector of the smallest covariance eigenvalue.
fn plane_normal<'a>(pts: impl Iterator<Item = &'a Vector3<f64>> + Clone) -> Option<Vector3<f64>> {
    let mut count = 0usize;
    let mut mean = Vector3::zeros();
    for p in pts.clone() {
        mean += p;
        count += 1;
    }
    mean /= count as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    let n = eig.eigenvectors.column(i).into_owned();
    let norm = n.norm();
    (norm > 0.0 && norm.is_finite()).then(|| n / norm)
}
