//! Fast Point Feature Histograms: 11 bins for each of the three angular
//! pair features, two-pass SPFH → FPFH with inverse-distance weighting.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{NearestNeighborIndex, PointCloud};

pub const FPFH_BINS: usize = 11;
pub const FPFH_DIM: usize = 3 * FPFH_BINS;

/// 33-bin descriptor normalized to unit total mass (each angular block sums
/// to 1/3). Points without neighbors get an all-zero histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpfhDescriptor(pub [f64; FPFH_DIM]);

impl FpfhDescriptor {
    pub fn zeros() -> Self {
        Self([0.0; FPFH_DIM])
    }

    pub fn bins(&self) -> &[f64; FPFH_DIM] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn l2_distance_sq(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Darboux-frame angle features `(alpha, phi, theta)` of an oriented point pair.
fn pair_features(
    p1: &Vector3<f64>,
    n1: &Vector3<f64>,
    p2: &Vector3<f64>,
    n2: &Vector3<f64>,
) -> Option<(f64, f64, f64)> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let angle1 = n1.dot(&dp) / dist;
    let angle2 = n2.dot(&dp) / dist;
    // Pick the source point whose normal makes the smaller angle with the line.
    let (src_n, tgt_n, theta) = if angle1.abs().acos() > angle2.abs().acos() {
        dp = -dp;
        (n2, n1, -angle2)
    } else {
        (n1, n2, angle1)
    };
    let v = dp.cross(src_n);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return None;
    }
    let v = v / v_norm;
    let w = src_n.cross(&v);
    let phi = v.dot(tgt_n);
    let alpha = w.dot(tgt_n).atan2(src_n.dot(tgt_n));
    Some((alpha, phi, theta))
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = (FPFH_BINS as f64 * (value - lo) / (hi - lo)).floor();
    (b.max(0.0) as usize).min(FPFH_BINS - 1)
}

/// FPFH descriptor per point using neighbors within `radius_mm`.
pub fn compute_fpfh(cloud: &PointCloud, radius_mm: f64) -> Result<Vec<FpfhDescriptor>> {
    let normals = cloud.normals().ok_or(Error::MissingNormals)?;
    if !(radius_mm > 0.0) {
        return Err(Error::InvalidInput(format!("feature radius must be positive, got {radius_mm}")));
    }
    let points = cloud.points();
    let index = NearestNeighborIndex::new(points);
    let neighborhoods: Vec<Vec<(usize, f64)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .within_radius(p, radius_mm)
                .into_iter()
                .filter(|n| n.index != i && n.dist_sq > 0.0)
                .map(|n| (n.index, n.dist()))
                .collect()
        })
        .collect();

    let spfh: Vec<[f64; FPFH_DIM]> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut hist = [0.0; FPFH_DIM];
            let nbrs = &neighborhoods[i];
            if nbrs.is_empty() {
                return hist;
            }
            let incr = 100.0 / nbrs.len() as f64;
            for &(j, _) in nbrs {
                if let Some((alpha, phi, theta)) = pair_features(&points[i], &normals[i], &points[j], &normals[j]) {
                    hist[bin(alpha, -PI, PI)] += incr;
                    hist[FPFH_BINS + bin(phi, -1.0, 1.0)] += incr;
                    hist[2 * FPFH_BINS + bin(theta, -1.0, 1.0)] += incr;
                }
            }
            hist
        })
        .collect();

    let isolated = neighborhoods.iter().filter(|n| n.is_empty()).count();
    if isolated > 0 {
        log::warn!("{isolated} point(s) have no neighbors within {radius_mm} mm; their FPFH is zero");
    }

    let descriptors = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let nbrs = &neighborhoods[i];
            if nbrs.is_empty() {
                return FpfhDescriptor::zeros();
            }
            let mut hist = spfh[i];
            let scale = 1.0 / nbrs.len() as f64;
            for &(j, dist) in nbrs {
                // Distances in units of the radius keep the neighbor weighting
                // independent of the length unit.
                let w = scale * radius_mm / dist;
                for (h, s) in hist.iter_mut().zip(&spfh[j]) {
                    *h += w * s;
                }
            }
            for block in hist.chunks_mut(FPFH_BINS) {
                let sum: f64 = block.iter().sum();
                if sum > 0.0 {
                    block.iter_mut().for_each(|v| *v /= 3.0 * sum);
                }
            }
            FpfhDescriptor(hist)
        })
        .collect();
    Ok(descriptors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;

    #[test]
    fn isolated_point_has_zero_histogram() {
        let cloud = PointCloud::with_normals(
            vec![Vector3::zeros(), Vector3::new(100.0, 0.0, 0.0)],
            vec![Vector3::z(), Vector3::z()],
            FrameId::ModelCt,
        )
        .unwrap();
        let d = compute_fpfh(&cloud, 5.0).unwrap();
        assert!(d.iter().all(FpfhDescriptor::is_zero));
    }

    #[test]
    fn requires_normals() {
        let cloud = PointCloud::new(vec![Vector3::zeros(); 3], FrameId::ModelCt).unwrap();
        assert!(matches!(compute_fpfh(&cloud, 5.0), Err(Error::MissingNormals)));
    }

    #[test]
    fn coplanar_pair_features_sit_mid_bin() {
        let (a, p, t) = pair_features(&Vector3::zeros(), &Vector3::z(), &Vector3::x(), &Vector3::z()).unwrap();
        assert_eq!((bin(a, -PI, PI), bin(p, -1.0, 1.0), bin(t, -1.0, 1.0)), (5, 5, 5));
    }

    #[test]
    fn bins_are_normalized() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let (x, y) = (i as f64, j as f64);
                pts.push(Vector3::new(x, y, 0.05 * x * x));
            }
        }
        let normals = pts.iter().map(|p| Vector3::new(-0.1 * p.x, 0.0, 1.0).normalize()).collect();
        let cloud = PointCloud::with_normals(pts, normals, FrameId::ModelCt).unwrap();
        for d in compute_fpfh(&cloud, 2.5).unwrap() {
            let total: f64 = d.bins().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d.bins().iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
    }
}
