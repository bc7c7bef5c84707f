//! Evaluation metrics: nearest-neighbor errors, Chamfer, Hausdorff, sliced
//! EMD, coverage, reconstruction accuracy, relative-distance maps, summary
//! statistics and the permutation test on medians.
//!
//! Distances are in mm, Chamfer in mm². Nearest-neighbor metrics are
//! unchanged by a rigid motion applied to both clouds. Sliced EMD projects on
//! seeded directions that do not rotate with the clouds, so it is exactly
//! translation invariant and rotation invariant only in expectation.

mod report;
mod stats;
mod trace;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NearestNeighborIndex, PointCloud};

pub use report::{
    evaluate_trial, split_pools, table_csv, EvaluationConfig, PoolMetrics, Span, TrialReport, TABLE_COLUMNS,
};
pub use stats::{permutation_test_medians, quantile_sorted, summarize, ErrorSummary, PermutationTestResult};
pub use trace::{trace_eval, TraceEvalConfig, TraceEvalResult};

pub const DEFAULT_COVERAGE_THRESHOLD_MM: f64 = 5.0;
pub const DEFAULT_EMD_DIRECTIONS: usize = 100;
pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// Per-point shortest distances from a surface cloud to a reference
/// structure, mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMap {
    pub distances_mm: Vec<f64>,
}

impl DistanceMap {
    pub fn len(&self) -> usize {
        self.distances_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances_mm.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamferDistance {
    /// Mean over `a` of the squared distance to `b`, mm².
    pub a_to_b_mm2: f64,
    pub b_to_a_mm2: f64,
    /// Sum of the two directed means.
    pub symmetric_mm2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffDistance {
    pub a_to_b_mm: f64,
    pub b_to_a_mm: f64,
    pub symmetric_mm: f64,
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if a.frame() != b.frame() {
        return Err(Error::FrameMismatch { expected: a.frame(), found: b.frame() });
    }
    Ok(())
}

/// Squared distance from every query point to its nearest indexed point.
fn nn_dist_sq(queries: &[Vector3<f64>], index: &NearestNeighborIndex) -> Vec<f64> {
    queries.par_iter().map(|q| index.nearest(q).expect("index is non-empty and points are finite").dist_sq).collect()
}

fn directed_sq(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
    nn_dist_sq(from.points(), &NearestNeighborIndex::new(to.points()))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Distance from each traced point to the nearest reference point.
pub fn per_point_nn_error(traced: &PointCloud, reference: &PointCloud) -> Result<Vec<f64>> {
    check_pair(traced, reference)?;
    Ok(directed_sq(traced, reference).into_iter().map(f64::sqrt).collect())
}

/// Index of the nearest `to` point for every `from` point.
pub fn nn_pairing(from: &PointCloud, to: &PointCloud) -> Result<Vec<usize>> {
    check_pair(from, to)?;
    let index = NearestNeighborIndex::new(to.points());
    Ok(from
        .points()
        .par_iter()
        .map(|q| index.nearest(q).expect("index is non-empty and points are finite").index)
        .collect())
}

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<ChamferDistance> {
    check_pair(a, b)?;
    let ab = mean(&directed_sq(a, b));
    let ba = mean(&directed_sq(b, a));
    Ok(ChamferDistance { a_to_b_mm2: ab, b_to_a_mm2: ba, symmetric_mm2: ab + ba })
}

pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<HausdorffDistance> {
    check_pair(a, b)?;
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max).sqrt();
    let ab = max(directed_sq(a, b));
    let ba = max(directed_sq(b, a));
    Ok(HausdorffDistance { a_to_b_mm: ab, b_to_a_mm: ba, symmetric_mm: ab.max(ba) })
}

/// 1-D Wasserstein-1 distance between two sorted samples.
///
/// Both quantile functions are evaluated at `max(n, m)` evenly spaced levels
/// with linear interpolation; for equal sizes this is exact order-statistic
/// matching.
fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let levels = a.len().max(b.len());
    if levels == 1 {
        return (a[0] - b[0]).abs();
    }
    let span = (levels - 1) as f64;
    let total: f64 = (0..levels)
        .map(|i| {
            let q = i as f64 / span;
            (quantile_sorted(a, q) - quantile_sorted(b, q)).abs()
        })
        .sum();
    total / levels as f64
}

/// Sliced Wasserstein-1 distance: the mean 1-D W1 distance between the two
/// clouds projected on `n_directions` uniformly random unit directions.
pub fn sliced_emd(a: &PointCloud, b: &PointCloud, n_directions: usize, seed: u64) -> Result<f64> {
    check_pair(a, b)?;
    if n_directions == 0 {
        return Err(Error::InvalidInput("sliced EMD needs at least one direction".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = Vec::with_capacity(n_directions);
    while directions.len() < n_directions {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let norm = v.norm();
        if norm > 1e-12 {
            directions.push(v / norm);
        }
    }
    let project = |cloud: &PointCloud, u: &Vector3<f64>| {
        let mut p: Vec<f64> = cloud.points().iter().map(|x| x.dot(u)).collect();
        p.sort_unstable_by(f64::total_cmp);
        p
    };
    let per_direction: Vec<f64> =
        directions.par_iter().map(|u| wasserstein1_sorted(&project(a, u), &project(b, u))).collect();
    Ok(mean(&per_direction))
}

/// Fraction of reference points within `threshold_mm` of the overlay.
pub fn surface_coverage(reference: &PointCloud, overlay: &PointCloud, threshold_mm: f64) -> Result<f64> {
    check_threshold(threshold_mm)?;
    check_pair(reference, overlay)?;
    let t2 = threshold_mm * threshold_mm;
    let covered = directed_sq(reference, overlay).into_iter().filter(|&d| d <= t2).count();
    Ok(covered as f64 / reference.len() as f64)
}

/// Mean reference-to-overlay distance over the covered reference points.
pub fn reconstruction_accuracy(reference: &PointCloud, overlay: &PointCloud, threshold_mm: f64) -> Result<f64> {
    check_threshold(threshold_mm)?;
    check_pair(reference, overlay)?;
    let t2 = threshold_mm * threshold_mm;
    let covered: Vec<f64> = directed_sq(reference, overlay).into_iter().filter(|&d| d <= t2).map(f64::sqrt).collect();
    if covered.is_empty() {
        return Err(Error::NothingCovered { threshold_mm });
    }
    Ok(mean(&covered))
}

fn check_threshold(threshold_mm: f64) -> Result<()> {
    if threshold_mm >= 0.0 && threshold_mm.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("coverage threshold must be finite and non-negative, got {threshold_mm}")))
    }
}

/// Shortest distance from each surface point to the internal structure.
pub fn relative_distance_map(surface: &PointCloud, internal: &PointCloud) -> Result<DistanceMap> {
    Ok(DistanceMap { distances_mm: per_point_nn_error(surface, internal)? })
}

/// Summary of `|d_ar[i] − d_ct[pairing[i]]|` over all AR points.
pub fn compare_distance_maps(d_ar: &DistanceMap, d_ct: &DistanceMap, pairing: &[usize]) -> Result<ErrorSummary> {
    if pairing.len() != d_ar.len() {
        return Err(Error::InvalidInput(format!(
            "pairing has {} entries for {} AR distances",
            pairing.len(),
            d_ar.len()
        )));
    }
    if let Some(&j) = pairing.iter().find(|&&j| j >= d_ct.len()) {
        return Err(Error::InvalidInput(format!("pairing index {j} out of range for {} CT distances", d_ct.len())));
    }
    let deltas: Vec<f64> =
        d_ar.distances_mm.iter().zip(pairing).map(|(a, &j)| (a - d_ct.distances_mm[j]).abs()).collect();
    summarize(&deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FrameId, RigidTransform};
    use proptest::prelude::*;
    use rand::Rng;

    fn cloud(points: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud::new(points, FrameId::World).unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cloud((0..n).map(|_| Vector3::from_fn(|_, _| rng.random_range(-50.0..50.0))).collect())
    }

    fn brute_sq(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
        from.points()
            .iter()
            .map(|q| to.points().iter().map(|p| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .collect()
    }

    #[test]
    fn identical_clouds_score_zero() {
        let a = random_cloud(200, 1);
        assert!(per_point_nn_error(&a, &a).unwrap().iter().all(|&d| d == 0.0));
        assert_eq!(chamfer(&a, &a).unwrap().symmetric_mm2, 0.0);
        assert_eq!(hausdorff(&a, &a).unwrap().symmetric_mm, 0.0);
        assert_eq!(sliced_emd(&a, &a, 50, 3).unwrap(), 0.0);
        assert_eq!(surface_coverage(&a, &a, 0.5).unwrap(), 1.0);
        assert_eq!(reconstruction_accuracy(&a, &a, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn singleton_values() {
        let a = cloud(vec![Vector3::zeros()]);
        let b = cloud(vec![Vector3::new(0.0, 2.0, 0.0)]);
        assert_eq!(chamfer(&a, &b).unwrap().symmetric_mm2, 8.0);
        let c = cloud(vec![Vector3::new(7.0, 0.0, 0.0)]);
        assert_eq!(hausdorff(&a, &c).unwrap().symmetric_mm, 7.0);
        assert_eq!(surface_coverage(&a, &c, 0.0).unwrap(), 0.0);
        assert!(matches!(reconstruction_accuracy(&a, &c, 5.0), Err(Error::NothingCovered { .. })));
    }

    #[test]
    fn point_above_plane_grid() {
        let plane = cloud(
            (0..41).flat_map(|i| (0..41).map(move |j| Vector3::new(i as f64 - 20.0, j as f64 - 20.0, 0.0))).collect(),
        );
        let traced = cloud(vec![Vector3::new(0.3, -0.2, 3.0)]);
        let d = per_point_nn_error(&traced, &plane).unwrap()[0];
        assert!((d - 3.0).abs() < 0.05, "{d}");
    }

    #[test]
    fn half_covered_reconstruction() {
        let reference = cloud((0..10).map(|i| Vector3::new(i as f64 * 1000.0, 0.0, 0.0)).collect());
        let overlay = cloud(
            (0..10).map(|i| Vector3::new(i as f64 * 1000.0, if i % 2 == 0 { 1.0 } else { 100.0 }, 0.0)).collect(),
        );
        assert_eq!(reconstruction_accuracy(&reference, &overlay, 5.0).unwrap(), 1.0);
        assert_eq!(surface_coverage(&reference, &overlay, 5.0).unwrap(), 0.5);
    }

    #[test]
    fn plane_above_line_distance_map() {
        let line = cloud((-50..=50).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect());
        let plane = cloud(
            (-10..=10).flat_map(|i| (-10..=10).map(move |j| Vector3::new(i as f64, j as f64 * 0.0, 10.0))).collect(),
        );
        let map = relative_distance_map(&plane, &line).unwrap();
        assert!(map.distances_mm.iter().all(|d| (d - 10.0).abs() < 1e-12));
    }

    #[test]
    fn matches_brute_force() {
        let a = random_cloud(300, 7);
        let b = random_cloud(180, 8);
        let ab = brute_sq(&a, &b);
        let ba = brute_sq(&b, &a);
        let err = per_point_nn_error(&a, &b).unwrap();
        assert_eq!(err, ab.iter().map(|d| d.sqrt()).collect::<Vec<_>>());
        let c = chamfer(&a, &b).unwrap();
        assert_eq!(c.a_to_b_mm2, ab.iter().sum::<f64>() / ab.len() as f64);
        assert_eq!(c.b_to_a_mm2, ba.iter().sum::<f64>() / ba.len() as f64);
        let h = hausdorff(&a, &b).unwrap();
        assert_eq!(h.a_to_b_mm, ab.iter().cloned().fold(0.0, f64::max).sqrt());
        assert_eq!(h.b_to_a_mm, ba.iter().cloned().fold(0.0, f64::max).sqrt());
    }

    #[test]
    fn constant_offset_comparison() {
        let d_ct = DistanceMap { distances_mm: vec![1.0, 2.0, 3.0, 4.0] };
        let d_ar = DistanceMap { distances_mm: vec![1.5, 2.5, 3.5, 4.5] };
        let s = compare_distance_maps(&d_ar, &d_ct, &[0, 1, 2, 3]).unwrap();
        assert!((s.median_mm - 0.5).abs() < 1e-12);
        assert!(s.iqr_mm.abs() < 1e-12);
        assert!((s.rmse_mm - 0.5).abs() < 1e-12);
        assert!(compare_distance_maps(&d_ar, &d_ct, &[0, 1, 2]).is_err());
        assert!(compare_distance_maps(&d_ar, &d_ct, &[0, 1, 2, 9]).is_err());
    }

    #[test]
    fn emd_unequal_sizes_interpolates() {
        // Projections of {0, 2} and {0, 1, 2} share every quantile.
        let a = [0.0, 2.0];
        let b = [0.0, 1.0, 2.0];
        assert_eq!(wasserstein1_sorted(&a, &b), 0.0);
        assert!((wasserstein1_sorted(&[0.0], &[3.0]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn emd_is_seeded() {
        let a = random_cloud(100, 2);
        let b = random_cloud(120, 3);
        assert_eq!(sliced_emd(&a, &b, 20, 9).unwrap(), sliced_emd(&a, &b, 20, 9).unwrap());
        assert!(sliced_emd(&a, &b, 0, 9).is_err());
    }

    #[test]
    fn rejects_empty_and_mixed_frames() {
        let a = random_cloud(10, 1);
        let empty = PointCloud::empty(FrameId::World);
        assert!(matches!(chamfer(&a, &empty), Err(Error::EmptyCloud)));
        let other = a.clone().relabel(FrameId::ModelCt);
        assert!(matches!(hausdorff(&a, &other), Err(Error::FrameMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symmetric_metrics_swap(seed in 0u64..1000, n in 1usize..60, m in 1usize..60) {
            let a = random_cloud(n, seed);
            let b = random_cloud(m, seed + 1);
            prop_assert_eq!(chamfer(&a, &b).unwrap().symmetric_mm2, chamfer(&b, &a).unwrap().symmetric_mm2);
            prop_assert_eq!(hausdorff(&a, &b).unwrap().symmetric_mm, hausdorff(&b, &a).unwrap().symmetric_mm);
        }

        #[test]
        fn metrics_non_negative(seed in 0u64..1000, n in 1usize..60, m in 1usize..60) {
            let a = random_cloud(n, seed);
            let b = random_cloud(m, seed + 1);
            prop_assert!(per_point_nn_error(&a, &b).unwrap().iter().all(|&d| d >= 0.0));
            prop_assert!(chamfer(&a, &b).unwrap().symmetric_mm2 >= 0.0);
            prop_assert!(hausdorff(&a, &b).unwrap().symmetric_mm >= 0.0);
            prop_assert!(sliced_emd(&a, &b, 10, seed).unwrap() >= 0.0);
        }

        #[test]
        fn rigid_invariance(seed in 0u64..1000, angle in -3.0f64..3.0, tx in -500.0f64..500.0) {
            let a = random_cloud(80, seed);
            let b = random_cloud(70, seed + 1);
            let t = RigidTransform::from_axis_angle(&Vector3::new(0.3, -1.0, 0.5), angle, Vector3::new(tx, 20.0, -tx), FrameId::World, FrameId::World);
            let (ta, tb) = (t.apply(&a).unwrap(), t.apply(&b).unwrap());
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
            prop_assert!(close(chamfer(&a, &b).unwrap().symmetric_mm2, chamfer(&ta, &tb).unwrap().symmetric_mm2));
            prop_assert!(close(hausdorff(&a, &b).unwrap().symmetric_mm, hausdorff(&ta, &tb).unwrap().symmetric_mm));
            prop_assert!(close(surface_coverage(&a, &b, 15.0).unwrap(), surface_coverage(&ta, &tb, 15.0).unwrap()));
            if let Ok(acc) = reconstruction_accuracy(&a, &b, 15.0) {
                prop_assert!(close(acc, reconstruction_accuracy(&ta, &tb, 15.0).unwrap()));
            }
            for (x, y) in per_point_nn_error(&a, &b).unwrap().iter().zip(per_point_nn_error(&ta, &tb).unwrap()) {
                prop_assert!(close(*x, y));
            }
        }

        #[test]
        fn emd_translation_invariant(seed in 0u64..1000, tx in -500.0f64..500.0, ty in -500.0f64..500.0) {
            let a = random_cloud(60, seed);
            let b = random_cloud(45, seed + 1);
            let t = RigidTransform::from_translation(Vector3::new(tx, ty, 3.0), FrameId::World, FrameId::World);
            let before = sliced_emd(&a, &b, 16, seed).unwrap();
            let after = sliced_emd(&t.apply(&a).unwrap(), &t.apply(&b).unwrap(), 16, seed).unwrap();
            prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before));
        }

        #[test]
        fn coverage_monotone_and_accuracy_bounded(seed in 0u64..1000, t1 in 0.0f64..40.0, dt in 0.0f64..40.0) {
            let a = random_cloud(50, seed);
            let b = random_cloud(50, seed + 1);
            let t2 = t1 + dt;
            prop_assert!(surface_coverage(&a, &b, t1).unwrap() <= surface_coverage(&a, &b, t2).unwrap());
            if let Ok(acc) = reconstruction_accuracy(&a, &b, t2) {
                prop_assert!(acc <= t2);
            }
        }
    }
}
