//! Bounding-volume hierarchy over triangles with Möller–Trumbore hits.

use nalgebra::Vector3;

use crate::sampling::TriangleMesh;

const LEAF_TRIANGLES: usize = 4;
const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self { lo: Vector3::repeat(f64::INFINITY), hi: Vector3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    /// Entry distance of the ray into the box, if it is hit before `t_max`.
    fn hit(&self, origin: &Vector3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - origin[k]) * inv_dir[k];
            let b = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// First intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub point: Vector3<f64>,
    /// Geometric (face) normal of the hit triangle.
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct RayCaster {
    mesh: TriangleMesh,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl RayCaster {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let mut caster = Self { mesh: mesh.clone(), order: (0..mesh.triangles().len()).collect(), nodes: Vec::new() };
        if !mesh.is_empty() {
            let centroids: Vec<Vector3<f64>> = (0..mesh.triangles().len())
                .map(|t| {
                    let [a, b, c] = mesh.corners(t);
                    (a + b + c) / 3.0
                })
                .collect();
            caster.build(0, mesh.triangles().len(), &centroids);
        }
        caster
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Vector3<f64>]) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for corner in self.mesh.corners(t) {
                bounds.grow(&corner);
            }
            cbounds.grow(&centroids[t]);
        }
        let id = self.nodes.len();
        let extent = cbounds.hi - cbounds.lo;
        let axis = extent.imax();
        if end - start <= LEAF_TRIANGLES || extent[axis] <= 0.0 {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start: 0, end: 0 });
        let left = self.build(start, mid, centroids);
        let right = self.build(mid, end, centroids);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Closest hit with `t > 0` along `origin + t·dir`; ties go to the lower
    /// triangle index.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = dir.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let t_max = best.map_or(f64::INFINITY, |b| b.0);
            if !self.nodes[n].bounds().hit(origin, &inv_dir, t_max) {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &tri in &self.order[start..end] {
                        let [a, b, c] = self.mesh.corners(tri);
                        if let Some(t) = intersect(origin, dir, &a, &b, &c) {
                            let better = match best {
                                None => true,
                                Some((bt, bi)) => t < bt || (t == bt && tri < bi),
                            };
                            if better {
                                best = Some((t, tri));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.map(|(t, triangle)| RayHit {
            t,
            triangle,
            point: origin + dir * t,
            normal: self.mesh.face_normal(triangle),
        })
    }
}

/// Möller–Trumbore ray/triangle intersection (both sides), `t > 0`.
pub fn intersect(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < PARALLEL_EPS * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Shape;

    #[test]
    fn bvh_matches_linear_scan() {
        let mesh = Shape::Foot.mesh();
        let caster = RayCaster::new(&mesh);
        let origin = Vector3::new(3.0, -2.0, -400.0);
        for k in 0..200 {
            let dir = Vector3::new((k as f64 * 0.37).sin() * 0.25, (k as f64 * 0.71).cos() * 0.12, 1.0).normalize();
            let mut best: Option<(f64, usize)> = None;
            for t in 0..mesh.triangles().len() {
                let [a, b, c] = mesh.corners(t);
                if let Some(d) = intersect(&origin, &dir, &a, &b, &c) {
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, t));
                    }
                }
            }
            let hit = caster.cast(&origin, &dir).map(|h| (h.t, h.triangle));
            assert_eq!(hit, best);
        }
    }

    #[test]
    fn misses_return_none() {
        let caster = RayCaster::new(&Shape::Sphere.mesh());
        assert!(caster.cast(&Vector3::new(0.0, 0.0, -500.0), &Vector3::new(0.0, 1.0, 0.0)).is_none());
    }
}
