//! Static 3-D kd-tree.
//!
//! All queries break distance ties by the lowest point index, so results are
//! a pure function of the indexed points and the query.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Nearest-neighbor index over a fixed set of points.
#[derive(Debug, Clone)]
pub struct NearestNeighborIndex {
    points: Vec<Vector3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// A neighbor hit: point index and squared distance (mm²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn key_cmp(&self, other: &Neighbor) -> Ordering {
        self.dist_sq.total_cmp(&other.dist_sq).then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

impl NearestNeighborIndex {
    pub fn new(points: &[Vector3<f64>]) -> Self {
        let mut index = Self { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
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

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let extent = hi - lo;
        let axis = extent.imax();
        if extent[axis] == 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Closest indexed point; ties go to the lowest index. `None` for an
    /// empty index or a non-finite query.
    pub fn nearest(&self, query: &Vector3<f64>) -> Option<Neighbor> {
        if self.points.is_empty() || !query.iter().all(|c| c.is_finite()) {
            return None;
        }
        let mut best = Neighbor { index: usize::MAX, dist_sq: f64::INFINITY };
        self.nearest_rec(0, query, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: usize, query: &Vector3<f64>, best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor { index: i, dist_sq: (self.points[i] - query).norm_squared() };
                    if cand.key_cmp(best) == Ordering::Less {
                        *best = cand;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, query, best);
                if diff * diff <= best.dist_sq {
                    self.nearest_rec(far, query, best);
                }
            }
        }
    }

    /// The `k` closest points sorted by (distance, index).
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() || !query.iter().all(|c| c.is_finite()) {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, query, k, &mut heap);
        heap.into_sorted_vec()
    }

    fn knn_rec(&self, node: usize, query: &Vector3<f64>, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor { index: i, dist_sq: (self.points[i] - query).norm_squared() };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, query, k, heap);
                let bound =
                    if heap.len() < k { f64::INFINITY } else { heap.peek().map_or(f64::INFINITY, |n| n.dist_sq) };
                if diff * diff <= bound {
                    self.knn_rec(far, query, k, heap);
                }
            }
        }
    }

    /// All points with distance ≤ `radius`, sorted by (distance, index).
    pub fn within_radius(&self, query: &Vector3<f64>, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if self.points.is_empty() || !(radius >= 0.0) {
            return out;
        }
        self.radius_rec(0, query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, query: &Vector3<f64>, r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist_sq = (self.points[i] - query).norm_squared();
                    if dist_sq <= r2 {
                        out.push(Neighbor { index: i, dist_sq });
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, query, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, query, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_nearest(points: &[Vector3<f64>], q: &Vector3<f64>) -> Neighbor {
        let mut best = Neighbor { index: usize::MAX, dist_sq: f64::INFINITY };
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.dist_sq {
                best = Neighbor { index: i, dist_sq: d };
            }
        }
        best
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let mut pts = vec![Vector3::new(5.0, 5.0, 5.0); 40];
        pts.push(Vector3::new(1.0, 0.0, 0.0));
        pts.push(Vector3::new(-1.0, 0.0, 0.0));
        let index = NearestNeighborIndex::new(&pts);
        assert_eq!(index.nearest(&Vector3::zeros()).unwrap().index, 40);
        assert_eq!(index.nearest(&Vector3::new(5.0, 5.0, 5.0)).unwrap().index, 0);
        let knn = index.knn(&Vector3::new(5.0, 5.0, 5.0), 3);
        assert_eq!(knn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn empty_index() {
        let index = NearestNeighborIndex::new(&[]);
        assert!(index.nearest(&Vector3::zeros()).is_none());
        assert!(index.knn(&Vector3::zeros(), 3).is_empty());
    }

    fn cloud() -> impl Strategy<Value = Vec<Vector3<f64>>> {
        prop::collection::vec(
            (-20i32..20, -20i32..20, -20i32..20)
                .prop_map(|(x, y, z)| Vector3::new(x as f64 * 0.5, y as f64 * 0.5, z as f64 * 0.5)),
            1..300,
        )
    }

    proptest! {
        #[test]
        fn nearest_matches_linear_scan(points in cloud(), q in (-12.0f64..12.0, -12.0f64..12.0, -12.0f64..12.0)) {
            let q = Vector3::new(q.0, q.1, q.2);
            let index = NearestNeighborIndex::new(&points);
            prop_assert_eq!(index.nearest(&q).unwrap(), brute_nearest(&points, &q));
        }

        #[test]
        fn knn_and_radius_match_sorted_scan(points in cloud(), k in 1usize..20, r in 0.0f64..6.0) {
            let q = Vector3::new(0.25, -0.75, 1.5);
            let index = NearestNeighborIndex::new(&points);
            let mut all: Vec<Neighbor> = points.iter().enumerate()
                .map(|(i, p)| Neighbor { index: i, dist_sq: (p - q).norm_squared() }).collect();
            all.sort();
            let expect_knn: Vec<_> = all.iter().copied().take(k).collect();
            prop_assert_eq!(index.knn(&q, k), expect_knn);
            let expect_r: Vec<_> = all.iter().copied().filter(|n| n.dist_sq <= r * r).collect();
            prop_assert_eq!(index.within_radius(&q, r), expect_r);
        }
    }
}
