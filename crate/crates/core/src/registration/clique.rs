//! Pairwise-consistency pruning: correspondences whose mutual distances agree
//! in scene and model form a clique; the largest clique is kept.

use nalgebra::Matrix3;
use rayon::prelude::*;

use super::CorrespondenceSet;
use crate::geometry::PointCloud;

/// Approximate scene ← model rotation: pairs whose difference vectors
/// disagree with it by more than `max_angle_deg` are not joined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationPrior {
    pub rotation: Matrix3<f64>,
    pub max_angle_deg: f64,
}

/// Adjacency as one bitset row per vertex.
#[derive(Debug, Clone)]
pub struct ConsistencyGraph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    degree: Vec<usize>,
}

impl ConsistencyGraph {
    /// Joins correspondences `a`, `b` when `|‖p_a − p_b‖ − ‖q_a − q_b‖| ≤ bound_mm`,
    /// they share neither endpoint, and (with a prior) `p_a − p_b` lies
    /// within the prior's angle of `R·(q_a − q_b)`.
    pub fn build(
        corrs: &CorrespondenceSet,
        scene: &PointCloud,
        model: &PointCloud,
        bound_mm: f64,
        prior: Option<&RotationPrior>,
    ) -> Self {
        let n = corrs.len();
        let words = n.div_ceil(64);
        let pairs = corrs.pairs();
        let (sp, mp) = (scene.points(), model.points());
        let min_cos = prior.map(|p| p.max_angle_deg.to_radians().cos());
        let rows: Vec<Vec<u64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut row = vec![0u64; words];
                let ca = pairs[a];
                for (b, cb) in pairs.iter().enumerate() {
                    if ca.scene == cb.scene || ca.model == cb.model {
                        continue;
                    }
                    let dp = sp[ca.scene] - sp[cb.scene];
                    let dq = mp[ca.model] - mp[cb.model];
                    let (ds, dm) = (dp.norm(), dq.norm());
                    if (ds - dm).abs() > bound_mm {
                        continue;
                    }
                    if let (Some(prior), Some(min_cos)) = (prior, min_cos) {
                        if dp.dot(&(prior.rotation * dq)) < min_cos * ds * dm {
                            continue;
                        }
                    }
                    row[b / 64] |= 1 << (b % 64);
                }
                row
            })
            .collect();
        let degree = rows.iter().map(|r| r.iter().map(|w| w.count_ones() as usize).sum()).collect();
        Self { n, words, bits: rows.concat(), degree }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edge_count(&self) -> usize {
        self.degree.iter().sum::<usize>() / 2
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    /// Core number of every vertex and a degeneracy ordering.
    fn cores(&self) -> (Vec<usize>, Vec<usize>) {
        let mut degree = self.degree.clone();
        let mut removed = vec![false; self.n];
        let mut core = vec![0; self.n];
        let mut order = Vec::with_capacity(self.n);
        let mut k = 0;
        for _ in 0..self.n {
            // Lowest remaining degree, lowest index on ties.
            let v = (0..self.n).filter(|&v| !removed[v]).min_by_key(|&v| (degree[v], v)).expect("vertices remain");
            k = k.max(degree[v]);
            core[v] = k;
            removed[v] = true;
            order.push(v);
            for u in 0..self.n {
                if !removed[u] && self.adjacent(u, v) {
                    degree[u] -= 1;
                }
            }
        }
        (core, order)
    }
}

struct Search<'a> {
    graph: &'a ConsistencyGraph,
    best: Vec<usize>,
    nodes: usize,
    budget: usize,
}

impl Search<'_> {
    /// Greedy colouring of `cands`; returns vertices sorted by colour with
    /// their colour numbers (1-based), an upper bound on clique size.
    fn colour(&self, cands: &[usize]) -> Vec<(usize, usize)> {
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &v in cands {
            match classes.iter_mut().find(|c| c.iter().all(|&u| !self.graph.adjacent(u, v))) {
                Some(c) => c.push(v),
                None => classes.push(vec![v]),
            }
        }
        classes.into_iter().enumerate().flat_map(|(k, c)| c.into_iter().map(move |v| (v, k + 1))).collect()
    }

    fn expand(&mut self, clique: &mut Vec<usize>, cands: Vec<usize>) {
        self.nodes += 1;
        if cands.is_empty() {
            if clique.len() > self.best.len() {
                self.best = clique.clone();
            }
            return;
        }
        let coloured = self.colour(&cands);
        for i in (0..coloured.len()).rev() {
            let (v, colour) = coloured[i];
            if clique.len() + colour <= self.best.len() || self.nodes > self.budget {
                return;
            }
            let next: Vec<usize> =
                coloured[..i].iter().map(|&(u, _)| u).filter(|&u| self.graph.adjacent(u, v)).collect();
            clique.push(v);
            self.expand(clique, next);
            clique.pop();
        }
    }
}

/// Maximum clique by branch and bound with colouring bounds, seeded per
/// vertex in degeneracy order. Stops early (keeping the best clique found)
/// once `node_budget` search nodes have been visited.
pub fn max_clique(graph: &ConsistencyGraph, node_budget: usize) -> Vec<usize> {
    if graph.is_empty() {
        return Vec::new();
    }
    let (core, order) = graph.cores();
    let mut position = vec![0; graph.len()];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut search = Search { graph, best: vec![order[0]], nodes: 0, budget: node_budget };
    for &v in order.iter().rev() {
        if core[v] < search.best.len() {
            continue;
        }
        let cands: Vec<usize> = (0..graph.len())
            .filter(|&u| position[u] > position[v] && graph.adjacent(u, v) && core[u] + 1 > search.best.len())
            .collect();
        let mut clique = vec![v];
        search.expand(&mut clique, cands);
        if search.nodes > search.budget {
            log::warn!("maximum-clique search stopped after {} nodes; using best clique found", search.nodes);
            break;
        }
    }
    let mut best = search.best;
    best.sort_unstable();
    best
}
