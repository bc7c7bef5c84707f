use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FpfhDescriptor;
use crate::error::{Error, Result};

/// Index pair into a scene cloud and a model cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Correspondence {
    pub scene: usize,
    pub model: usize,
}

/// Duplicate-free list of correspondences with optional match scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pairs: Vec<Correspondence>,
    scores: Option<Vec<f64>>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<Correspondence>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        if let Some(dup) = pairs.iter().find(|c| !seen.insert(**c)) {
            return Err(Error::InvalidInput(format!("duplicate correspondence {dup:?}")));
        }
        Ok(Self { pairs, scores: None })
    }

    pub fn with_scores(pairs: Vec<Correspondence>, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != pairs.len() {
            return Err(Error::InvalidInput("score count differs from pair count".into()));
        }
        let mut set = Self::new(pairs)?;
        set.scores = Some(scores);
        Ok(set)
    }

    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Subset at the given positions.
    pub fn subset(&self, positions: &[usize]) -> CorrespondenceSet {
        CorrespondenceSet {
            pairs: positions.iter().map(|&i| self.pairs[i]).collect(),
            scores: self.scores.as_ref().map(|s| positions.iter().map(|&i| s[i]).collect()),
        }
    }

    /// Checks that all indices address clouds of the given sizes.
    pub fn check_bounds(&self, scene_len: usize, model_len: usize) -> Result<()> {
        match self.pairs.iter().find(|c| c.scene >= scene_len || c.model >= model_len) {
            Some(c) => Err(Error::InvalidInput(format!(
                "correspondence {c:?} out of range for clouds of {scene_len} and {model_len} points"
            ))),
            None => Ok(()),
        }
    }
}

fn nearest_descriptor(query: &FpfhDescriptor, set: &[FpfhDescriptor]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, d) in set.iter().enumerate() {
        let dist = query.l2_distance_sq(d);
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best
}

/// Nearest neighbor of every scene descriptor among the model descriptors
/// (Euclidean, ties to the lowest index). With `mutual`, only pairs that are
/// also nearest in the model → scene direction are kept. Scores are
/// descriptor distances.
pub fn match_fpfh(scene: &[FpfhDescriptor], model: &[FpfhDescriptor], mutual: bool) -> Result<CorrespondenceSet> {
    if scene.is_empty() || model.is_empty() {
        return Err(Error::InvalidInput("descriptor sets must be non-empty".into()));
    }
    let forward: Vec<(usize, f64)> = scene.par_iter().map(|d| nearest_descriptor(d, model)).collect();
    let backward: Option<Vec<usize>> =
        mutual.then(|| model.par_iter().map(|d| nearest_descriptor(d, scene).0).collect());
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for (i, &(j, dist_sq)) in forward.iter().enumerate() {
        if backward.as_ref().is_some_and(|b| b[j] != i) {
            continue;
        }
        pairs.push(Correspondence { scene: i, model: j });
        scores.push(dist_sq.sqrt());
    }
    CorrespondenceSet::with_scores(pairs, scores)
}

/// The `k` nearest descriptors of `query` in `set`, sorted by (distance, index).
fn nearest_descriptors(query: &FpfhDescriptor, set: &[FpfhDescriptor], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = set.iter().enumerate().map(|(j, d)| (j, query.l2_distance_sq(d))).collect();
    let k = k.min(all.len());
    let by_key = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_key);
        all.truncate(k);
    }
    all.sort_by(by_key);
    all
}

/// Up to `k` candidate model matches per scene descriptor. With `mutual`, a
/// pair survives only if the scene descriptor is also among the `k` nearest
/// of the model descriptor. `k = 1` is plain nearest-neighbor matching.
pub fn match_fpfh_top_k(
    scene: &[FpfhDescriptor],
    model: &[FpfhDescriptor],
    k: usize,
    mutual: bool,
) -> Result<CorrespondenceSet> {
    if scene.is_empty() || model.is_empty() {
        return Err(Error::InvalidInput("descriptor sets must be non-empty".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("matches per point must be at least 1".into()));
    }
    let forward: Vec<Vec<(usize, f64)>> = scene.par_iter().map(|d| nearest_descriptors(d, model, k)).collect();
    let backward: Option<Vec<Vec<usize>>> = mutual.then(|| {
        model.par_iter().map(|d| nearest_descriptors(d, scene, k).into_iter().map(|(i, _)| i).collect()).collect()
    });
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for (i, cands) in forward.iter().enumerate() {
        for &(j, dist_sq) in cands {
            if backward.as_ref().is_some_and(|b| !b[j].contains(&i)) {
                continue;
            }
            pairs.push(Correspondence { scene: i, model: j });
            scores.push(dist_sq.sqrt());
        }
    }
    CorrespondenceSet::with_scores(pairs, scores)
}

/// Up to `k` matches per scene descriptor, each searched only among that
/// point's `candidates` (model indices). Scene points without candidates
/// contribute nothing.
pub fn match_fpfh_among(
    scene: &[FpfhDescriptor],
    model: &[FpfhDescriptor],
    candidates: &[Vec<usize>],
    k: usize,
) -> Result<CorrespondenceSet> {
    if candidates.len() != scene.len() {
        return Err(Error::InvalidInput("one candidate list per scene descriptor required".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("matches per point must be at least 1".into()));
    }
    if let Some(&j) = candidates.iter().flatten().find(|&&j| j >= model.len()) {
        return Err(Error::InvalidInput(format!("candidate model index {j} out of range")));
    }
    let by_key = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    let ranked: Vec<Vec<(usize, f64)>> = scene
        .par_iter()
        .zip(candidates.par_iter())
        .map(|(d, cands)| {
            let mut all: Vec<(usize, f64)> = cands.iter().map(|&j| (j, d.l2_distance_sq(&model[j]))).collect();
            all.sort_by(by_key);
            all.truncate(k);
            all
        })
        .collect();
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for (i, cands) in ranked.iter().enumerate() {
        for &(j, dist_sq) in cands {
            pairs.push(Correspondence { scene: i, model: j });
            scores.push(dist_sq.sqrt());
        }
    }
    CorrespondenceSet::with_scores(pairs, scores)
}
