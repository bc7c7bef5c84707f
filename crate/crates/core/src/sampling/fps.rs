use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Seed point for farthest-point sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpsStart {
    /// Start from index 0.
    #[default]
    First,
    /// Start from an index drawn from the given seed.
    Seeded(u64),
}

/// Greedy farthest-point sampling starting from index 0.
pub fn farthest_point_sample(cloud: &PointCloud, n: usize) -> Result<PointCloud> {
    farthest_point_sample_from(cloud, n, FpsStart::First)
}

/// Greedy farthest-point sampling: repeatedly adds the point with the largest
/// distance to the selected set (ties to the lowest index). Output follows
/// selection order.
pub fn farthest_point_sample_from(cloud: &PointCloud, n: usize, start: FpsStart) -> Result<PointCloud> {
    Ok(cloud.select(&fps_indices(cloud, n, start)?))
}

pub(crate) fn fps_indices(cloud: &PointCloud, n: usize, start: FpsStart) -> Result<Vec<usize>> {
    let pts = cloud.points();
    if n > pts.len() {
        return Err(Error::TargetExceedsInput { requested: n, available: pts.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let first = match start {
        FpsStart::First => 0,
        FpsStart::Seeded(seed) => ChaCha8Rng::seed_from_u64(seed).random_range(0..pts.len()),
    };
    let mut chosen = Vec::with_capacity(n);
    let mut min_d2 = vec![f64::INFINITY; pts.len()];
    let mut current = first;
    for _ in 0..n {
        chosen.push(current);
        let c = pts[current];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in pts.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            if min_d2[i] > best.0 {
                best = (min_d2[i], i);
            }
        }
        current = best.1;
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;
    use nalgebra::Vector3;

    fn cube_corners() -> PointCloud {
        let pts = (0..8).map(|i| Vector3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64)).collect();
        PointCloud::new(pts, FrameId::ModelCt).unwrap()
    }

    #[test]
    fn two_corners_are_opposite() {
        let out = farthest_point_sample(&cube_corners(), 2).unwrap();
        let d = (out.points()[0] - out.points()[1]).norm();
        assert!((d - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn full_selection_is_permutation() {
        let c = cube_corners();
        let idx = fps_indices(&c, 8, FpsStart::First).unwrap();
        let mut sorted = idx.clone();
        sorted.sort();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
        assert!(matches!(farthest_point_sample(&c, 9), Err(Error::TargetExceedsInput { .. })));
    }

    #[test]
    fn seeded_start_is_deterministic() {
        let c = cube_corners();
        let a = farthest_point_sample_from(&c, 4, FpsStart::Seeded(5)).unwrap();
        assert_eq!(a, farthest_point_sample_from(&c, 4, FpsStart::Seeded(5)).unwrap());
    }
}
