use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Triangle areas at or below this (mm²) count as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle surface in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    vertex_normals: Option<Vec<Vector3<f64>>>,
}

/// A validated mesh plus the number of degenerate triangles removed.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedMesh {
    pub mesh: TriangleMesh,
    pub dropped_degenerate: usize,
}

impl TriangleMesh {
    /// Validates indices and coordinates and drops zero-area triangles.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<ValidatedMesh> {
        Self::with_vertex_normals(vertices, triangles, None)
    }

    pub fn with_vertex_normals(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
        vertex_normals: Option<Vec<Vector3<f64>>>,
    ) -> Result<ValidatedMesh> {
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!("vertex {i} has a non-finite coordinate")));
        }
        if let Some(ns) = &vertex_normals {
            if ns.len() != vertices.len() {
                return Err(Error::InvalidInput("vertex normal count differs from vertex count".into()));
            }
        }
        if let Some((t, tri)) = triangles.iter().enumerate().find(|(_, tri)| tri.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidInput(format!(
                "triangle {t} references vertex out of range: {tri:?} (have {})",
                vertices.len()
            )));
        }
        let before = triangles.len();
        let triangles: Vec<[usize; 3]> =
            triangles.into_iter().filter(|t| triangle_area(&vertices, t) > MIN_TRIANGLE_AREA).collect();
        let dropped_degenerate = before - triangles.len();
        if dropped_degenerate > 0 {
            log::warn!("dropped {dropped_degenerate} degenerate triangle(s)");
        }
        Ok(ValidatedMesh { mesh: TriangleMesh { vertices, triangles, vertex_normals }, dropped_degenerate })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> Option<&[Vector3<f64>]> {
        self.vertex_normals.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        triangle_area(&self.vertices, &self.triangles[t])
    }

    /// Unit normal from the counter-clockwise winding.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Applies `f` to every vertex (normals are recomputed from faces when needed).
    pub fn map_vertices(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            vertex_normals: None,
        }
    }
}

fn triangle_area(vertices: &[Vector3<f64>], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Unsigned distance from `p` to the mesh surface (linear scan over triangles).
pub fn point_to_mesh_distance(mesh: &TriangleMesh, p: &Vector3<f64>) -> f64 {
    (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            (p - closest_point_on_triangle(p, &a, &b, &c)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_degenerate_and_rejects_bad_indices() {
        let v = vec![Vector3::zeros(), Vector3::x(), Vector3::y(), Vector3::new(2.0, 0.0, 0.0)];
        let ok = TriangleMesh::new(v.clone(), vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(ok.mesh.triangles().len(), 1);
        assert_eq!(ok.dropped_degenerate, 1);
        assert!(TriangleMesh::new(v, vec![[0, 1, 7]]).is_err());
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vector3::zeros(), Vector3::x(), Vector3::y());
        let p = Vector3::new(0.25, 0.25, 3.0);
        assert_eq!(closest_point_on_triangle(&p, &a, &b, &c), Vector3::new(0.25, 0.25, 0.0));
        assert_eq!(closest_point_on_triangle(&Vector3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        let edge = closest_point_on_triangle(&Vector3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((edge - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    }
}
