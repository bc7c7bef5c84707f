//! Synthetic tracing sessions: a skin patch and the internal structure
//! beneath it, traced once exactly in the CT frame and once with a noisy
//! tracked tool in the headset world frame.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{perturb_pose, Shape};
use crate::error::{Error, Result};
use crate::geometry::{FrameId, NearestNeighborIndex, PointCloud, RigidTransform};
use crate::sampling::{uniform_surface_sample, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    pub shape: Shape,
    pub seed: u64,
    /// Isotropic per-axis noise of each AR-traced point.
    pub noise_sigma_mm: f64,
    pub patch_radius_mm: f64,
    /// The internal structure is the skin mesh shrunk by this factor about
    /// its vertex centroid.
    pub internal_scale: f64,
    pub ct_surface_points: usize,
    pub ct_internal_points: usize,
    pub ar_surface_points: usize,
    pub ar_internal_points: usize,
    /// Residual misalignment of the AR tracing (rotation σ deg, shift σ mm).
    pub misalignment: (f64, f64),
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Leg,
            seed: 0,
            noise_sigma_mm: 0.5,
            patch_radius_mm: 40.0,
            internal_scale: 0.6,
            ct_surface_points: 3000,
            ct_internal_points: 3000,
            ar_surface_points: 600,
            ar_internal_points: 600,
            misalignment: (2.0, 3.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceScenario {
    /// World frame, noisy.
    pub ar_surface: PointCloud,
    pub ar_internal: PointCloud,
    /// ModelCt frame, exact.
    pub ct_surface: PointCloud,
    pub ct_internal: PointCloud,
    /// World ← ModelCt map applied to the AR tracing before noise.
    pub world_from_model: RigidTransform,
}

/// `count` uniform surface points within `radius` of `center`.
fn patch(
    mesh: &TriangleMesh,
    center: &Vector3<f64>,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vector3<f64>>> {
    let pool = (count * 400).max(50_000);
    let dense = uniform_surface_sample(mesh, pool, seed)?;
    let picked: Vec<Vector3<f64>> =
        dense.points().iter().filter(|p| (*p - center).norm() <= radius).take(count).copied().collect();
    if picked.len() < count {
        return Err(Error::InsufficientData { needed: count, got: picked.len() });
    }
    Ok(picked)
}

pub fn generate_trace_scenario(spec: &TraceSpec) -> Result<TraceScenario> {
    if !(spec.noise_sigma_mm >= 0.0
        && spec.patch_radius_mm > 0.0
        && spec.internal_scale > 0.0
        && spec.internal_scale < 1.0)
    {
        return Err(Error::InvalidInput("trace spec needs sigma >= 0, radius > 0 and internal scale in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let skin = spec.shape.mesh();
    let centroid = skin.vertices().iter().sum::<Vector3<f64>>() / skin.vertices().len() as f64;
    let internal = skin.map_vertices(|v| centroid + (v - centroid) * spec.internal_scale);

    let center = uniform_surface_sample(&skin, 1, rng.random())?.points()[0];
    // The internal patch sits beneath the skin patch and reaches as far
    // sideways.
    let probe = uniform_surface_sample(&internal, 20_000, rng.random())?;
    let index = NearestNeighborIndex::new(probe.points());
    let beneath = probe.points()[index.nearest(&center).expect("probe is non-empty").index];
    let internal_radius = spec.patch_radius_mm + (beneath - center).norm();

    let ct_surface = patch(&skin, &center, spec.patch_radius_mm, spec.ct_surface_points, rng.random())?;
    let ct_internal = patch(&internal, &center, internal_radius, spec.ct_internal_points, rng.random())?;
    let ar_surface = patch(&skin, &center, spec.patch_radius_mm, spec.ar_surface_points, rng.random())?;
    let ar_internal = patch(&internal, &center, internal_radius, spec.ar_internal_points, rng.random())?;

    let world_from_model = perturb_pose(
        &RigidTransform::identity(FrameId::ModelCt, FrameId::World),
        spec.misalignment.0,
        spec.misalignment.1,
        rng.random(),
    );
    let noise = Normal::new(0.0, spec.noise_sigma_mm).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut trace = |points: Vec<Vector3<f64>>| {
        let noisy = points
            .iter()
            .map(|p| world_from_model.transform_point(p) + Vector3::from_fn(|_, _| noise.sample(&mut rng)))
            .collect();
        PointCloud::new(noisy, FrameId::World)
    };
    Ok(TraceScenario {
        ar_surface: trace(ar_surface)?,
        ar_internal: trace(ar_internal)?,
        ct_surface: PointCloud::new(ct_surface, FrameId::ModelCt)?,
        ct_internal: PointCloud::new(ct_internal, FrameId::ModelCt)?,
        world_from_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_frames_and_determinism() {
        let spec = TraceSpec { ct_surface_points: 500, ct_internal_points: 500, ..TraceSpec::default() };
        let a = generate_trace_scenario(&spec).unwrap();
        assert_eq!(a.ar_surface.len(), 600);
        assert_eq!(a.ct_internal.len(), 500);
        assert_eq!(a.ar_internal.frame(), FrameId::World);
        assert_eq!(a.ct_surface.frame(), FrameId::ModelCt);
        let b = generate_trace_scenario(&spec).unwrap();
        assert_eq!(a.ar_surface, b.ar_surface);
    }

    #[test]
    fn noiseless_ar_trace_lies_on_the_mapped_skin() {
        let spec =
            TraceSpec { noise_sigma_mm: 0.0, ct_surface_points: 200, ct_internal_points: 200, ..TraceSpec::default() };
        let s = generate_trace_scenario(&spec).unwrap();
        let skin = spec.shape.mesh();
        let back = s.world_from_model.inverse();
        for p in s.ar_surface.points().iter().take(50) {
            let d = crate::sampling::point_to_mesh_distance(&skin, &back.transform_point(p));
            assert!(d < 1e-9, "{d}");
        }
    }
}
