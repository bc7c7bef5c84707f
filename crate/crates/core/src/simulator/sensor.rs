//! Pinhole depth sensor: +z forward, +x right, +y down, sensor at the origin.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RayCaster;
use crate::error::{Error, Result};
use crate::geometry::{FrameId, PointCloud};
use crate::sampling::TriangleMesh;

pub const DEFAULT_RESOLUTION: (usize, usize) = (256, 256);
pub const DEFAULT_FOV_Y_DEG: f64 = 75.0;

/// Depth offset applied along the viewing ray (positive = farther away).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BiasField {
    None,
    ConstantRay {
        offset_mm: f64,
    },
    /// `A·(1 + ½·sin(2πx/P)·sin(2πy/P))` over sensor-frame `x, y`.
    Smooth {
        amplitude_mm: f64,
        period_mm: f64,
    },
}

impl Default for BiasField {
    fn default() -> Self {
        BiasField::Smooth { amplitude_mm: 1.5, period_mm: 80.0 }
    }
}

impl BiasField {
    pub fn offset_at(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            BiasField::None => 0.0,
            BiasField::ConstantRay { offset_mm } => offset_mm,
            BiasField::Smooth { amplitude_mm, period_mm } => {
                amplitude_mm * (1.0 + 0.5 * (TAU * p.x / period_mm).sin() * (TAU * p.y / period_mm).sin())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub gaussian_sigma_mm: f64,
    pub bias_field: BiasField,
    pub dropout_fraction: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { gaussian_sigma_mm: 1.0, bias_field: BiasField::default(), dropout_fraction: 0.0 }
    }
}

impl SensorModel {
    /// Noise-free, bias-free, no dropout.
    pub fn ideal() -> Self {
        Self { gaussian_sigma_mm: 0.0, bias_field: BiasField::None, dropout_fraction: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma_mm >= 0.0 && self.gaussian_sigma_mm.is_finite()) {
            return Err(Error::InvalidInput("gaussian_sigma_mm must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_fraction) {
            return Err(Error::InvalidInput("dropout_fraction must lie in [0, 1)".into()));
        }
        if let BiasField::Smooth { period_mm, .. } = self.bias_field {
            if !(period_mm > 0.0) {
                return Err(Error::InvalidInput("bias period must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels with the principal point at the image center.
    pub fn from_fov(width: usize, height: usize, fov_y_deg: f64) -> Result<Self> {
        if width == 0 || height == 0 || !(fov_y_deg > 0.0 && fov_y_deg < 180.0) {
            return Err(Error::InvalidInput(format!("invalid camera {width}x{height}, fov {fov_y_deg}")));
        }
        let fy = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Ok(Self { width, height, fx: fy, fy, cx: 0.5 * width as f64, cy: 0.5 * height as f64 })
    }

    /// Unit viewing ray through the center of pixel `(u, v)`.
    pub fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        Vector3::new((u as f64 + 0.5 - self.cx) / self.fx, (v as f64 + 0.5 - self.cy) / self.fy, 1.0).normalize()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthCapture {
    /// Measured points in the sensor frame, in row-major pixel order.
    pub cloud: PointCloud,
    /// Exact surface point behind each measured point.
    pub truth: Vec<Vector3<f64>>,
    pub pixels: Vec<(usize, usize)>,
}

/// Renders `mesh` (already in the sensor frame) and applies dropout, noise
/// along the ray and bias, in that order.
pub fn render_depth_capture(
    mesh: &TriangleMesh,
    intrinsics: &Intrinsics,
    sensor: &SensorModel,
    seed: u64,
) -> Result<DepthCapture> {
    sensor.validate()?;
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let caster = RayCaster::new(mesh);
    let origin = Vector3::zeros();
    let hits: Vec<Option<(Vector3<f64>, Vector3<f64>)>> = (0..intrinsics.width * intrinsics.height)
        .into_par_iter()
        .map(|k| {
            let (u, v) = (k % intrinsics.width, k / intrinsics.width);
            let dir = intrinsics.ray(u, v);
            let hit = caster.cast(&origin, &dir)?;
            // Back faces seen first mean the ray entered through a hole or
            // from inside; drop them.
            (hit.normal.dot(&dir) < 0.0).then_some((hit.point, dir))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sensor.gaussian_sigma_mm.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut points = Vec::new();
    let mut truth = Vec::new();
    let mut pixels = Vec::new();
    for (k, hit) in hits.into_iter().enumerate() {
        let Some((p, dir)) = hit else { continue };
        // One dropout draw and one noise draw per hit keeps the stream aligned
        // across sensor settings.
        let drop = rng.random::<f64>() < sensor.dropout_fraction;
        let eps = noise.sample(&mut rng);
        if drop {
            continue;
        }
        let eps = if sensor.gaussian_sigma_mm > 0.0 { eps } else { 0.0 };
        let noisy = p + dir * eps;
        let measured = noisy + dir * sensor.bias_field.offset_at(&noisy);
        points.push(measured);
        truth.push(p);
        pixels.push((k % intrinsics.width, k / intrinsics.width));
    }
    if points.is_empty() {
        return Err(Error::NoVisibleSurface);
    }
    Ok(DepthCapture { cloud: PointCloud::new(points, FrameId::DepthSensor)?, truth, pixels })
}
