//! Built-in closed test surfaces (mm), centered near the origin.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::sampling::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Radius 60 mm.
    Sphere,
    /// Tapered elliptical cylinder with a front crest, a calf bulge and
    /// shallow relief.
    Leg,
    /// Elongated ellipsoid with a dorsal ridge, asymmetric bumps and relief.
    Foot,
    /// Small flattened shell with a rim, a deep hollow and folds.
    Ear,
    /// Ellipsoid with nose, brow and cheek bumps.
    Head,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Sphere, Shape::Leg, Shape::Foot, Shape::Ear, Shape::Head];

    pub fn mesh(self) -> TriangleMesh {
        match self {
            Shape::Sphere => sphere_mesh(60.0, 96, 48),
            Shape::Leg => leg_mesh(),
            Shape::Foot => foot_mesh(),
            Shape::Ear => ear_mesh(),
            Shape::Head => head_mesh(),
        }
    }
}

/// Rings of `nu` vertices from `ring(φ, j)` closed by two pole vertices.
/// Faces are wound so that they point away from the enclosed volume.
fn lathe(
    nu: usize,
    rings: usize,
    ring: impl Fn(f64, usize) -> Vector3<f64>,
    south: Vector3<f64>,
    north: Vector3<f64>,
) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nu * rings + 2);
    for j in 0..rings {
        for i in 0..nu {
            vertices.push(ring(TAU * i as f64 / nu as f64, j));
        }
    }
    let s = vertices.len();
    vertices.push(south);
    vertices.push(north);
    let at = |j: usize, i: usize| j * nu + i % nu;
    let mut triangles = Vec::with_capacity(2 * nu * rings);
    for i in 0..nu {
        triangles.push([s, at(0, i + 1), at(0, i)]);
        triangles.push([s + 1, at(rings - 1, i), at(rings - 1, i + 1)]);
    }
    for j in 0..rings - 1 {
        for i in 0..nu {
            triangles.push([at(j, i), at(j, i + 1), at(j + 1, i + 1)]);
            triangles.push([at(j, i), at(j + 1, i + 1), at(j + 1, i)]);
        }
    }
    let volume: f64 = triangles.iter().map(|t| vertices[t[0]].dot(&vertices[t[1]].cross(&vertices[t[2]]))).sum();
    if volume < 0.0 {
        for t in &mut triangles {
            t.swap(1, 2);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("generated mesh is valid").mesh
}

fn unit(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Star-shaped surface `u ↦ (axes ∘ u)·(1 + Σ bumps)` over polar angle θ.
fn radial(axes: Vector3<f64>, nu: usize, nv: usize, bump: impl Fn(&Vector3<f64>) -> f64) -> TriangleMesh {
    let point = |u: Vector3<f64>| axes.component_mul(&u) * (1.0 + bump(&u));
    lathe(
        nu,
        nv,
        |phi, j| point(unit(PI * (j + 1) as f64 / (nv + 1) as f64, phi)),
        point(Vector3::new(0.0, 0.0, 1.0)),
        point(Vector3::new(0.0, 0.0, -1.0)),
    )
}

/// Gaussian bump of relative height `h` and angular width `w` (rad) about `dir`.
fn bump(u: &Vector3<f64>, dir: Vector3<f64>, h: f64, w: f64) -> f64 {
    let angle = u.dot(&dir.normalize()).clamp(-1.0, 1.0).acos();
    h * (-(angle / w).powi(2)).exp()
}

pub fn sphere_mesh(radius: f64, nu: usize, nv: usize) -> TriangleMesh {
    radial(Vector3::repeat(radius), nu, nv, |_| 0.0)
}

/// Fixed pseudo-random surface relief: `count` bumps with relative heights
/// in `±height` and angular widths in `width`.
fn relief(count: usize, salt: u64, height: f64, width: (f64, f64)) -> Vec<(Vector3<f64>, f64, f64)> {
    let mut state = salt;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count)
        .map(|_| {
            let z = 2.0 * next() - 1.0;
            let phi = TAU * next();
            let r = (1.0 - z * z).sqrt();
            let dir = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            let h = height * (2.0 * next() - 1.0);
            let w = width.0 + (width.1 - width.0) * next();
            (dir, h, w)
        })
        .collect()
}

fn head_mesh() -> TriangleMesh {
    let detail = relief(60, 0x4ead, 0.08, (0.1, 0.25));
    radial(Vector3::new(75.0, 90.0, 100.0), 160, 96, move |u| {
        detail.iter().map(|&(d, h, w)| bump(u, d, h, w)).sum::<f64>()
            + bump(u, Vector3::new(1.0, 0.0, 0.05), 0.18, 0.22)
            + bump(u, Vector3::new(0.85, 0.0, 0.5), 0.07, 0.35)
            + bump(u, Vector3::new(0.55, 0.6, -0.3), 0.06, 0.3)
            + bump(u, Vector3::new(-0.1, -1.0, 0.1), 0.09, 0.25)
            + bump(u, Vector3::new(-0.6, 0.2, 0.8), 0.05, 0.5)
    })
}

fn foot_mesh() -> TriangleMesh {
    let detail = relief(50, 0xf007, 0.06, (0.12, 0.3));
    radial(Vector3::new(120.0, 45.0, 35.0), 160, 80, move |u| {
        let dorsal = 0.22 * (-(u.y / 0.3).powi(2)).exp() * u.z.max(0.0) * (0.6 + 0.4 * u.x);
        detail.iter().map(|&(d, h, w)| bump(u, d, h, w)).sum::<f64>()
            + dorsal
            + bump(u, Vector3::new(-1.0, 0.0, -0.2), 0.12, 0.35)
            + bump(u, Vector3::new(0.7, 0.7, 0.0), 0.1, 0.3)
            + bump(u, Vector3::new(0.2, -0.6, -0.8), 0.08, 0.4)
    })
}

fn ear_mesh() -> TriangleMesh {
    let folds = relief(24, 0xea7, 0.12, (0.15, 0.35));
    radial(Vector3::new(32.0, 20.0, 9.0), 128, 64, move |u| {
        // Raised rim around the outline and a hollow on the front face.
        let rim = 0.25 * (-(u.z / 0.35).powi(2)).exp() * (0.7 + 0.3 * u.x);
        folds.iter().map(|&(d, h, w)| bump(u, d, h, w)).sum::<f64>()
            + rim
            + bump(u, Vector3::new(0.1, -0.1, 1.0), -0.45, 0.45)
            + bump(u, Vector3::new(-0.4, 0.9, 0.0), 0.15, 0.3)
    })
}

fn leg_mesh() -> TriangleMesh {
    const HALF: f64 = 110.0;
    const RINGS: usize = 96;
    let z_of = |j: usize| -HALF + 2.0 * HALF * j as f64 / (RINGS - 1) as f64;
    // Relief bumps as (angle, height along the axis, mm, angular width, axial width mm).
    let detail: Vec<(f64, f64, f64, f64, f64)> = relief(40, 0x1e9, 4.0, (0.2, 0.45))
        .into_iter()
        .map(|(d, h, w)| (d.y.atan2(d.x), d.z * (HALF - 15.0), h, w, 40.0 * w))
        .collect();
    let ring = |phi: f64, j: usize| {
        let z = z_of(j);
        let s = (z + HALF) / (2.0 * HALF);
        let (a, b) = (45.0 - 8.0 * s, 38.0 - 6.0 * s);
        let wrap = |d: f64| (d + PI).rem_euclid(TAU) - PI;
        let crest = 6.0 * (-(wrap(phi) / 0.25).powi(2)).exp();
        let calf = 10.0 * (-(wrap(phi - PI) / 0.8).powi(2)).exp() * (-((z - 40.0) / 50.0).powi(2)).exp();
        let texture: f64 = detail
            .iter()
            .map(|&(p0, z0, h, w, wz)| h * (-(wrap(phi - p0) / w).powi(2) - ((z - z0) / wz).powi(2)).exp())
            .sum();
        let (c, sn) = (phi.cos(), phi.sin());
        let r = a * b / ((b * c).powi(2) + (a * sn).powi(2)).sqrt() + crest + calf + texture;
        Vector3::new(r * c, r * sn, z)
    };
    lathe(160, RINGS, ring, Vector3::new(0.0, 0.0, z_of(0)), Vector3::new(0.0, 0.0, z_of(RINGS - 1)))
}
