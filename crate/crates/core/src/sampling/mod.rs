//! Model point-cloud preparation: uniform surface sampling, voxel
//! downsampling, then farthest-point sampling.

mod fps;
mod mesh;
mod surface;
mod voxel;

pub use fps::{farthest_point_sample, farthest_point_sample_from, FpsStart};
pub use mesh::{closest_point_on_triangle, point_to_mesh_distance, TriangleMesh, ValidatedMesh, MIN_TRIANGLE_AREA};
pub use surface::uniform_surface_sample;
pub use voxel::voxel_downsample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub const DEFAULT_TARGET_POINTS: usize = 5000;
pub const DEFAULT_VOXEL_MM: f64 = 1.25;
/// Uniform pre-sample size as a multiple of the target point count.
pub const UNIFORM_OVERSAMPLING: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Surface samples drawn before downsampling; `None` means
    /// `UNIFORM_OVERSAMPLING × target_points`.
    pub uniform_sample_count: Option<usize>,
    pub voxel_size_mm: f64,
    pub target_points: usize,
    pub seed: u64,
    pub fps_start: FpsStart,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            uniform_sample_count: None,
            voxel_size_mm: DEFAULT_VOXEL_MM,
            target_points: DEFAULT_TARGET_POINTS,
            seed: 0,
            fps_start: FpsStart::First,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size_mm > 0.0 && self.voxel_size_mm.is_finite()) {
            return Err(Error::InvalidInput(format!("voxel_size_mm must be positive, got {}", self.voxel_size_mm)));
        }
        if self.target_points < 4 {
            return Err(Error::InvalidInput(format!("target_points must be at least 4, got {}", self.target_points)));
        }
        if self.uniform_sample_count == Some(0) {
            return Err(Error::InvalidInput("uniform_sample_count must be positive".into()));
        }
        Ok(())
    }

    pub fn uniform_count(&self) -> usize {
        self.uniform_sample_count.unwrap_or(self.target_points.saturating_mul(UNIFORM_OVERSAMPLING))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedModel {
    pub cloud: PointCloud,
    /// Points left after voxel downsampling.
    pub voxel_points: usize,
    /// Set when fewer voxel points than `target_points` were available.
    pub target_shortfall: bool,
}

/// `FPS(VoxelDown(UniformSample(mesh), v), N_t)`.
pub fn prepare_model(mesh: &TriangleMesh, cfg: &SamplingConfig) -> Result<PreparedModel> {
    cfg.validate()?;
    let dense = uniform_surface_sample(mesh, cfg.uniform_count(), cfg.seed)?;
    let voxels = voxel_downsample(&dense, cfg.voxel_size_mm)?;
    let voxel_points = voxels.len();
    if voxel_points < cfg.target_points {
        log::warn!(
            "voxel stage produced {voxel_points} points, fewer than the {} requested; keeping all",
            cfg.target_points
        );
        return Ok(PreparedModel { cloud: voxels, voxel_points, target_shortfall: true });
    }
    let cloud = farthest_point_sample_from(&voxels, cfg.target_points, cfg.fps_start)?;
    Ok(PreparedModel { cloud, voxel_points, target_shortfall: false })
}
