//! Depth-bias correction from stylus samples and ROI initialization.
//!
//! Stylus samples are ground-truth surface points already expressed in the
//! depth-sensor frame. Each sample is paired with its nearest depth point and
//! a single rigid correction is fitted by Procrustes, then applied to the ROI.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{procrustes_fit, FrameId, NearestNeighborIndex, PointCloud, RigidTransform};

/// Samples farther than this from every scene point are left unpaired.
pub const DEFAULT_MAX_PAIRING_MM: f64 = 10.0;
pub const DEFAULT_ROI_RADIUS_MM: f64 = 150.0;
/// Radius range outside which [`RoiSpec::new`] logs a warning.
pub const ROI_RADIUS_RANGE_MM: (f64, f64) = (80.0, 300.0);

/// Stylus-traced surface points in the depth-sensor frame (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSamples {
    points: Vec<Vector3<f64>>,
}

impl CalibrationSamples {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewPoints { needed: 3, got: points.len() });
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput("non-finite stylus sample".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }
}

/// Outcome of a bias fit.
#[derive(Debug, Clone, Serialize)]
pub struct BiasCorrection {
    /// DepthSensor ← DepthSensor correction applied to depth points.
    pub transform: RigidTransform,
    /// RMS sample-to-paired-depth-point distance before correction, mm.
    pub rms_before_mm: f64,
    /// RMS after applying `transform` to the paired depth points, mm.
    pub rms_after_mm: f64,
    pub paired: usize,
    pub unpaired: usize,
}

/// Fits the rigid bias correction with the default 10 mm pairing limit.
pub fn fit_bias_correction(samples: &CalibrationSamples, scene: &PointCloud) -> Result<BiasCorrection> {
    fit_bias_correction_with(samples, scene, DEFAULT_MAX_PAIRING_MM)
}

pub fn fit_bias_correction_with(
    samples: &CalibrationSamples,
    scene: &PointCloud,
    max_pairing_mm: f64,
) -> Result<BiasCorrection> {
    if scene.frame() != FrameId::DepthSensor {
        return Err(Error::FrameMismatch { expected: FrameId::DepthSensor, found: scene.frame() });
    }
    if scene.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let index = NearestNeighborIndex::new(scene.points());
    let mut depth = Vec::new();
    let mut truth = Vec::new();
    for l in samples.points() {
        let nn = index.nearest(l).expect("scene is non-empty");
        if nn.dist() <= max_pairing_mm {
            depth.push(scene.points()[nn.index]);
            truth.push(*l);
        }
    }
    let unpaired = samples.points().len() - depth.len();
    if unpaired > 0 {
        log::warn!("{unpaired} stylus sample(s) farther than {max_pairing_mm} mm from the depth cloud");
    }
    if depth.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "only {} stylus samples paired with depth points",
            depth.len()
        )));
    }
    let fit = procrustes_fit(&depth, &truth)?;
    let rms_before =
        (depth.iter().zip(&truth).map(|(p, l)| (p - l).norm_squared()).sum::<f64>() / depth.len() as f64).sqrt();
    Ok(BiasCorrection {
        transform: fit.into_transform(FrameId::DepthSensor, FrameId::DepthSensor),
        rms_before_mm: rms_before,
        rms_after_mm: fit.rms,
        paired: depth.len(),
        unpaired,
    })
}

/// `p ← R p + t` for every ROI point.
pub fn apply_bias_correction(roi_scene: &PointCloud, correction: &RigidTransform) -> Result<PointCloud> {
    if correction.to_frame() != correction.from_frame() {
        return Err(Error::FrameMismatch { expected: correction.from_frame(), found: correction.to_frame() });
    }
    correction.apply(roi_scene)
}

/// User-provided initial model pose in the world frame (World ← ModelCt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialPose {
    pose: RigidTransform,
}

impl InitialPose {
    pub fn new(pose: RigidTransform) -> Result<Self> {
        if pose.from_frame() != FrameId::ModelCt {
            return Err(Error::FrameMismatch { expected: FrameId::ModelCt, found: pose.from_frame() });
        }
        if pose.to_frame() != FrameId::World {
            return Err(Error::FrameMismatch { expected: FrameId::World, found: pose.to_frame() });
        }
        Ok(Self { pose })
    }

    pub fn pose(&self) -> &RigidTransform {
        &self.pose
    }
}

/// Expresses the initial pose in the sensor frame:
/// `T_sensor←model = (T_world←sensor)⁻¹ · T_world←model`.
pub fn init_pose_to_sensor(init: &InitialPose, world_from_sensor: &RigidTransform) -> Result<RigidTransform> {
    if world_from_sensor.from_frame() != FrameId::DepthSensor {
        return Err(Error::FrameMismatch { expected: FrameId::DepthSensor, found: world_from_sensor.from_frame() });
    }
    world_from_sensor.inverse().compose(init.pose())
}

/// Spherical region of interest in the depth-sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub center: Vector3<f64>,
    pub radius_mm: f64,
}

impl RoiSpec {
    pub fn new(center: Vector3<f64>, radius_mm: f64) -> Result<Self> {
        if !(radius_mm > 0.0) || !center.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid ROI (radius {radius_mm})")));
        }
        let (lo, hi) = ROI_RADIUS_RANGE_MM;
        if radius_mm < lo || radius_mm > hi {
            log::warn!("ROI radius {radius_mm} mm outside the usual {lo}-{hi} mm range");
        }
        Ok(Self { center, radius_mm })
    }

    /// ROI centered on the translation of the sensor-frame initial pose.
    pub fn around_pose(sensor_from_model: &RigidTransform, radius_mm: f64) -> Result<Self> {
        Self::new(*sensor_from_model.translation(), radius_mm)
    }

    pub fn in_default_range(&self) -> bool {
        (ROI_RADIUS_RANGE_MM.0..=ROI_RADIUS_RANGE_MM.1).contains(&self.radius_mm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiCrop {
    pub cloud: PointCloud,
    /// True when no point fell inside the ROI.
    pub empty: bool,
}

/// Keeps the points with `‖p − c‖ ≤ r`, preserving order.
pub fn crop_roi(scene: &PointCloud, roi: &RoiSpec) -> Result<RoiCrop> {
    if scene.frame() != FrameId::DepthSensor {
        return Err(Error::FrameMismatch { expected: FrameId::DepthSensor, found: scene.frame() });
    }
    let r2 = roi.radius_mm * roi.radius_mm;
    let cloud = scene.filter(|p| (p - roi.center).norm_squared() <= r2);
    let empty = cloud.is_empty();
    if empty {
        log::warn!("ROI of radius {} mm contains no scene points", roi.radius_mm);
    }
    Ok(RoiCrop { cloud, empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn stylus() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 400.0),
            Vector3::new(30.0, 0.0, 410.0),
            Vector3::new(0.0, 40.0, 395.0),
            Vector3::new(-25.0, -20.0, 420.0),
            Vector3::new(15.0, 35.0, 405.0),
        ]
    }

    #[test]
    fn exact_scene_gives_identity() {
        let samples = CalibrationSamples::new(stylus()).unwrap();
        let scene = PointCloud::new(stylus(), FrameId::DepthSensor).unwrap();
        let fit = fit_bias_correction(&samples, &scene).unwrap();
        assert_abs_diff_eq!(fit.transform.to_matrix4(), nalgebra::Matrix4::identity(), epsilon = 1e-9);
        assert!(fit.rms_after_mm < 1e-9);
    }

    #[test]
    fn pure_depth_offset_is_recovered() {
        // Depth points sit 2 mm further along +z; the correction moves them back.
        let samples = CalibrationSamples::new(stylus()).unwrap();
        let shifted: Vec<_> = stylus().iter().map(|p| p + Vector3::new(0.0, 0.0, 2.0)).collect();
        let scene = PointCloud::new(shifted, FrameId::DepthSensor).unwrap();
        let fit = fit_bias_correction(&samples, &scene).unwrap();
        assert_abs_diff_eq!(*fit.transform.translation(), Vector3::new(0.0, 0.0, -2.0), epsilon = 1e-6);
        assert_abs_diff_eq!(fit.rms_before_mm, 2.0, epsilon = 1e-9);
        let corrected = apply_bias_correction(&scene, &fit.transform).unwrap();
        for (a, b) in corrected.points().iter().zip(stylus()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn far_samples_are_excluded() {
        let mut pts = stylus();
        pts.push(Vector3::new(500.0, 500.0, 500.0));
        let samples = CalibrationSamples::new(pts).unwrap();
        let scene = PointCloud::new(stylus(), FrameId::DepthSensor).unwrap();
        let fit = fit_bias_correction(&samples, &scene).unwrap();
        assert_eq!((fit.paired, fit.unpaired), (5, 1));
    }

    #[test]
    fn frame_checks() {
        let samples = CalibrationSamples::new(stylus()).unwrap();
        let world = PointCloud::new(stylus(), FrameId::World).unwrap();
        assert!(matches!(fit_bias_correction(&samples, &world), Err(Error::FrameMismatch { .. })));
        let corr = RigidTransform::identity(FrameId::DepthSensor, FrameId::DepthSensor);
        assert!(matches!(apply_bias_correction(&world, &corr), Err(Error::FrameMismatch { .. })));
        let empty = PointCloud::empty(FrameId::DepthSensor);
        assert!(matches!(fit_bias_correction(&samples, &empty), Err(Error::EmptyCloud)));
        assert!(CalibrationSamples::new(stylus()[..2].to_vec()).is_err());
    }

    #[test]
    fn init_pose_examples() {
        let init = InitialPose::new(RigidTransform::identity(FrameId::ModelCt, FrameId::World)).unwrap();
        let id = RigidTransform::identity(FrameId::DepthSensor, FrameId::World);
        let out = init_pose_to_sensor(&init, &id).unwrap();
        assert_eq!(out, RigidTransform::identity(FrameId::ModelCt, FrameId::DepthSensor));
        let d = Vector3::new(5.0, -3.0, 12.0);
        let shift = RigidTransform::from_translation(d, FrameId::DepthSensor, FrameId::World);
        let out = init_pose_to_sensor(&init, &shift).unwrap();
        assert_eq!(*out.translation(), -d);
        assert!(InitialPose::new(RigidTransform::identity(FrameId::ModelCt, FrameId::DepthSensor)).is_err());
        let wrong = RigidTransform::identity(FrameId::OpticalTracker, FrameId::World);
        assert!(init_pose_to_sensor(&init, &wrong).is_err());
    }

    #[test]
    fn crop_boundary() {
        let pts = vec![Vector3::new(99.0, 0.0, 0.0), Vector3::new(101.0, 0.0, 0.0), Vector3::new(0.0, 100.0, 0.0)];
        let scene = PointCloud::new(pts, FrameId::DepthSensor).unwrap();
        let roi = RoiSpec::new(Vector3::zeros(), 100.0).unwrap();
        let crop = crop_roi(&scene, &roi).unwrap();
        assert_eq!(crop.cloud.points(), &[Vector3::new(99.0, 0.0, 0.0), Vector3::new(0.0, 100.0, 0.0)]);
        let far = RoiSpec::new(Vector3::new(1e4, 0.0, 0.0), 100.0).unwrap();
        assert!(crop_roi(&scene, &far).unwrap().empty);
        assert!(!RoiSpec::new(Vector3::zeros(), 50.0).unwrap().in_default_range());
    }
}
