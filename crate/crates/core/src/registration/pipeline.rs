//! End-to-end registration: bias correction, ROI, coarse, fine.

use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{coarse_register_with_prior, refine_icp, CoarseConfig, CoarseDiagnostics, IcpConfig, IcpDiagnostics};
use crate::calibration::{
    apply_bias_correction, crop_roi, fit_bias_correction_with, init_pose_to_sensor, BiasCorrection, CalibrationSamples,
    InitialPose, RoiSpec, DEFAULT_MAX_PAIRING_MM, DEFAULT_ROI_RADIUS_MM,
};
use crate::error::{Error, Result, Stage};
use crate::geometry::{estimate_normals, FrameId, PointCloud, RigidTransform, DEFAULT_NORMAL_K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    /// ROI radius used when no explicit ROI is given, mm.
    pub roi_radius_mm: f64,
    pub bias_max_pairing_mm: f64,
    /// Neighbors for scene normals used by ICP.
    pub normal_k: usize,
    /// Sensor origin in the sensor frame, for normal orientation.
    pub viewpoint: [f64; 3],
    pub coarse_only: bool,
    /// Let the initial pose guide the coarse stage (see
    /// [`coarse_register_with_prior`]).
    pub coarse_prior: bool,
    /// Also refine from the initial pose and keep whichever refinement ends
    /// with the lower robust objective.
    pub verify_initial: bool,
    pub coarse: CoarseConfig,
    pub icp: IcpConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            roi_radius_mm: DEFAULT_ROI_RADIUS_MM,
            bias_max_pairing_mm: DEFAULT_MAX_PAIRING_MM,
            normal_k: DEFAULT_NORMAL_K,
            viewpoint: [0.0; 3],
            coarse_only: false,
            coarse_prior: true,
            verify_initial: true,
            coarse: CoarseConfig::default(),
            icp: IcpConfig::default(),
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.roi_radius_mm > 0.0 && self.bias_max_pairing_mm > 0.0) {
            return Err(Error::InvalidInput("ROI radius and bias pairing distance must be positive".into()));
        }
        if self.normal_k < 3 {
            return Err(Error::InvalidInput("normal_k must be at least 3".into()));
        }
        self.coarse.validate()?;
        self.icp.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BiasStage {
    Skipped,
    Applied { transform: RigidTransform, rms_before_mm: f64, rms_after_mm: f64, paired: usize, unpaired: usize },
}

impl From<BiasCorrection> for BiasStage {
    fn from(b: BiasCorrection) -> Self {
        BiasStage::Applied {
            transform: b.transform,
            rms_before_mm: b.rms_before_mm,
            rms_after_mm: b.rms_after_mm,
            paired: b.paired,
            unpaired: b.unpaired,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiDiagnostics {
    pub center: [f64; 3],
    pub radius_mm: f64,
    pub scene_points: usize,
    pub roi_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub bias_ms: f64,
    pub roi_ms: f64,
    pub normals_ms: f64,
    pub coarse_ms: f64,
    pub fine_ms: f64,
    pub total_ms: f64,
}

/// Pose the retained ICP refinement started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineStart {
    Coarse,
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Initial pose expressed as DepthSensor ← ModelCt.
    pub init_pose: RigidTransform,
    pub bias: BiasStage,
    pub roi: RoiDiagnostics,
    pub coarse_pose: RigidTransform,
    pub coarse: CoarseDiagnostics,
    /// `icp_increment ∘ coarse_pose`; absent in coarse-only runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_pose: Option<RigidTransform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icp_increment: Option<RigidTransform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icp: Option<IcpDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine_start: Option<FineStart>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl RegistrationResult {
    /// Final pose, or the coarse pose in coarse-only runs.
    pub fn best_pose(&self) -> &RigidTransform {
        self.final_pose.as_ref().unwrap_or(&self.coarse_pose)
    }

    pub fn icp_iterations(&self) -> usize {
        self.icp.as_ref().map_or(0, |d| d.iterations)
    }

    pub fn final_objective_mm(&self) -> Option<f64> {
        self.icp.as_ref().map(|d| d.final_objective_mm)
    }

    pub fn inlier_fraction_coarse(&self) -> f64 {
        self.coarse.inlier_fraction
    }
}

fn contradiction(diag: &CoarseDiagnostics, cfg: &CoarseConfig) -> Error {
    Error::CoarseFailed { inlier_fraction: diag.inlier_fraction, minimum: cfg.min_inlier_fraction }
        .at_stage(Stage::Coarse)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs the full pipeline and returns the DepthSensor ← ModelCt estimate.
///
/// `scene` is the depth capture in the sensor frame; `model` the prepared
/// model cloud in the CT frame. With `roi = None` the ROI is a ball of
/// `cfg.roi_radius_mm` around the model centroid under the initial pose.
pub fn register_full(
    scene: &PointCloud,
    model: &PointCloud,
    init: &InitialPose,
    world_from_sensor: &RigidTransform,
    roi: Option<&RoiSpec>,
    bias: Option<&CalibrationSamples>,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    if scene.frame() != FrameId::DepthSensor {
        return Err(Error::FrameMismatch { expected: FrameId::DepthSensor, found: scene.frame() });
    }
    if model.frame() != FrameId::ModelCt {
        return Err(Error::FrameMismatch { expected: FrameId::ModelCt, found: model.frame() });
    }
    let start = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let (scene, bias_stage) = match bias {
        None => (scene.clone(), BiasStage::Skipped),
        Some(samples) => {
            let fit = fit_bias_correction_with(samples, scene, cfg.bias_max_pairing_mm)
                .map_err(|e| e.at_stage(Stage::Bias))?;
            let corrected = apply_bias_correction(scene, &fit.transform).map_err(|e| e.at_stage(Stage::Bias))?;
            (corrected, fit.into())
        }
    };
    timings.bias_ms = ms(t);

    let t = Instant::now();
    let init_pose = init_pose_to_sensor(init, world_from_sensor).map_err(|e| e.at_stage(Stage::Roi))?;
    let roi = match roi {
        Some(r) => *r,
        None => {
            let centroid = model.centroid().ok_or(Error::EmptyCloud).map_err(|e| e.at_stage(Stage::Roi))?;
            RoiSpec::new(init_pose.transform_point(&centroid), cfg.roi_radius_mm).map_err(|e| e.at_stage(Stage::Roi))?
        }
    };
    let crop = crop_roi(&scene, &roi).map_err(|e| e.at_stage(Stage::Roi))?;
    let roi_diag = RoiDiagnostics {
        center: roi.center.into(),
        radius_mm: roi.radius_mm,
        scene_points: scene.len(),
        roi_points: crop.cloud.len(),
    };
    timings.roi_ms = ms(t);
    let minimum = cfg.coarse.min_points.max(cfg.normal_k);
    if crop.cloud.len() < minimum {
        log::warn!("ROI holds {} points, coarse alignment needs {minimum}", crop.cloud.len());
        return Err(Error::CoarseFailed { inlier_fraction: 0.0, minimum: cfg.coarse.min_inlier_fraction }
            .at_stage(Stage::Coarse));
    }

    let t = Instant::now();
    let viewpoint = Vector3::from(cfg.viewpoint);
    let roi_scene = estimate_normals(&crop.cloud.without_normals(), cfg.normal_k, &viewpoint)
        .map_err(|e| e.at_stage(Stage::Normals))?;
    timings.normals_ms = ms(t);

    let t = Instant::now();
    let coarse_cfg = CoarseConfig { viewpoint: cfg.viewpoint, ..cfg.coarse.clone() };
    let prior = cfg.coarse_prior.then_some(&init_pose);
    let coarse =
        coarse_register_with_prior(&roi_scene, model, &coarse_cfg, prior).map_err(|e| e.at_stage(Stage::Coarse))?;
    timings.coarse_ms = ms(t);

    let mut result = RegistrationResult {
        init_pose,
        bias: bias_stage,
        roi: roi_diag,
        coarse_pose: coarse.pose,
        coarse: coarse.diagnostics,
        final_pose: None,
        icp_increment: None,
        icp: None,
        fine_start: None,
        timings: None,
    };
    if cfg.coarse_only {
        if result.coarse.contradicts_prior(&coarse_cfg) {
            return Err(contradiction(&result.coarse, &coarse_cfg));
        }
    } else {
        let t = Instant::now();
        let from_coarse = if result.coarse.contradicts_prior(&coarse_cfg) {
            log::warn!(
                "coarse rotation is {:.1} deg from the initial pose; not refining from it",
                result.coarse.prior_deviation_deg.unwrap_or_default()
            );
            if !cfg.verify_initial {
                return Err(contradiction(&result.coarse, &coarse_cfg));
            }
            None
        } else {
            Some(refine_icp(&roi_scene, model, &result.coarse_pose, &cfg.icp).map_err(|e| e.at_stage(Stage::Fine))?)
        };
        let from_initial = if cfg.verify_initial {
            // A failed refinement from the initial pose only means it loses,
            // unless there is nothing else.
            match refine_icp(&roi_scene, model, &init_pose, &cfg.icp) {
                Ok(alt) => Some(alt),
                Err(e) if from_coarse.is_none() => return Err(e.at_stage(Stage::Fine)),
                Err(_) => None,
            }
        } else {
            None
        };
        let (fine, start) = match (from_coarse, from_initial) {
            (Some(c), Some(i)) if i.diagnostics.final_objective_mm < c.diagnostics.final_objective_mm => {
                log::info!(
                    "refinement from the initial pose wins: {:.4} mm vs {:.4} mm",
                    i.diagnostics.final_objective_mm,
                    c.diagnostics.final_objective_mm
                );
                (i, FineStart::Initial)
            }
            (Some(c), _) => (c, FineStart::Coarse),
            (None, Some(i)) => (i, FineStart::Initial),
            (None, None) => unreachable!("one refinement always runs"),
        };
        timings.fine_ms = ms(t);
        // Express the kept result as an increment on the coarse pose.
        let increment = fine.pose.compose(&result.coarse_pose.inverse()).map_err(|e| e.at_stage(Stage::Fine))?;
        let final_pose = increment.compose(&result.coarse_pose).map_err(|e| e.at_stage(Stage::Fine))?;
        result.final_pose = Some(final_pose);
        result.icp_increment = Some(increment);
        result.icp = Some(fine.diagnostics);
        result.fine_start = Some(start);
    }
    timings.total_ms = ms(start);
    result.timings = Some(timings);
    Ok(result)
}
