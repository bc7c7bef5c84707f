//! Translation-invariant measurements: differences between pairs of
//! correspondences, which depend on rotation only.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Edge between correspondences `a` and `b` (positions in the set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimEdge {
    pub a: usize,
    pub b: usize,
    /// `p_a − p_b` in the scene, mm.
    pub scene_delta: Vector3<f64>,
    /// `q_a − q_b` in the model, mm.
    pub model_delta: Vector3<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimGraph {
    pub edges: Vec<TimEdge>,
}

impl TimGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Drops edges whose scene and model lengths differ by more than
    /// `bound_mm`; such edges cannot fit any rotation within that bound.
    pub fn retain_length_consistent(&mut self, bound_mm: f64) {
        self.edges.retain(|e| (e.scene_delta.norm() - e.model_delta.norm()).abs() <= bound_mm);
    }
}

/// Maps a linear index in `0..n(n-1)/2` to the pair `(i, j)`, `i < j`, in
/// lexicographic order.
fn decode_pair(k: usize, n: usize) -> (usize, usize) {
    // Row i starts at offset(i) = i·n − i(i+1)/2.
    let offset = |i: usize| i * n - i * (i + 1) / 2;
    let (mut lo, mut hi) = (0usize, n - 1);
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if offset(mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let i = if offset(hi) <= k && hi < n - 1 { hi } else { lo };
    (i, i + 1 + (k - offset(i)))
}

/// Samples up to `edge_budget` pairs of correspondences uniformly without
/// replacement (all pairs when the budget covers the complete graph). Edges
/// joining correspondences that share a scene or model point are skipped.
pub fn build_tims(
    correspondences: &CorrespondenceSet,
    scene: &PointCloud,
    model: &PointCloud,
    edge_budget: usize,
    seed: u64,
) -> Result<TimGraph> {
    let n = correspondences.len();
    if n < 2 {
        return Err(Error::TooFewCorrespondences { needed: 2, got: n });
    }
    correspondences.check_bounds(scene.len(), model.len())?;
    let total = n * (n - 1) / 2;
    let linear: Vec<usize> = if edge_budget >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, total, edge_budget).into_vec();
        picked.sort_unstable();
        picked
    };
    let pairs = correspondences.pairs();
    let (sp, mp) = (scene.points(), model.points());
    let edges = linear
        .into_iter()
        .map(|k| decode_pair(k, n))
        .filter(|&(a, b)| pairs[a].scene != pairs[b].scene && pairs[a].model != pairs[b].model)
        .map(|(a, b)| TimEdge {
            a,
            b,
            scene_delta: sp[pairs[a].scene] - sp[pairs[b].scene],
            model_delta: mp[pairs[a].model] - mp[pairs[b].model],
        })
        .collect();
    Ok(TimGraph { edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_covers_all_pairs_in_order() {
        for n in 2..12 {
            let mut expect = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    expect.push((i, j));
                }
            }
            let got: Vec<_> = (0..n * (n - 1) / 2).map(|k| decode_pair(k, n)).collect();
            assert_eq!(got, expect, "n = {n}");
        }
    }
}
