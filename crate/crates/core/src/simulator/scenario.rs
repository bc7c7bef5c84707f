use std::path::PathBuf;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    occlude, render_depth_capture, Cutout, Intrinsics, SensorModel, Shape, DEFAULT_FOV_Y_DEG, DEFAULT_RESOLUTION,
};
use crate::calibration::{CalibrationSamples, InitialPose};
use crate::error::{Error, Result};
use crate::geometry::{rotation_geodesic_deg, FrameId, PointCloud, RigidTransform};
use crate::io::load_mesh;
use crate::sampling::{prepare_model, PreparedModel, SamplingConfig, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    Shape(Shape),
    /// PLY or OBJ file in model (CT) coordinates, mm.
    File(PathBuf),
}

impl MeshSource {
    pub fn load(&self) -> Result<TriangleMesh> {
        match self {
            MeshSource::Shape(s) => Ok(s.mesh()),
            MeshSource::File(path) => Ok(load_mesh(path)?.mesh),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub rot_sigma_deg: f64,
    pub trans_sigma_mm: f64,
}

/// Everything needed to regenerate a synthetic capture bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub mesh: MeshSource,
    /// `[width, height]` in pixels.
    #[serde(default = "default_resolution")]
    pub resolution: [usize; 2],
    #[serde(default = "default_fov")]
    pub fov_y_deg: f64,
    /// World ← DepthSensor.
    pub camera_pose: RigidTransform,
    /// DepthSensor ← ModelCt.
    pub ground_truth_pose: RigidTransform,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub occlusion: Vec<Cutout>,
    pub init_perturbation: Perturbation,
    #[serde(default = "default_stylus")]
    pub stylus_samples: usize,
    #[serde(default)]
    pub model: SamplingConfig,
}

fn default_resolution() -> [usize; 2] {
    [DEFAULT_RESOLUTION.0, DEFAULT_RESOLUTION.1]
}

fn default_fov() -> f64 {
    DEFAULT_FOV_Y_DEG
}

fn default_stylus() -> usize {
    30
}

/// Sub-seeds drawn from the scenario seed, one per random stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSeeds {
    pub render: u64,
    pub perturb: u64,
    pub stylus: u64,
}

impl ScenarioSeeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { render: rng.next_u64(), perturb: rng.next_u64(), stylus: rng.next_u64() }
    }
}

/// Uniformly distributed rotation.
fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let q = Quaternion::new(g(), g(), g(), g());
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

impl ScenarioSpec {
    /// A desk-scale capture of `shape` 450 mm (ear: 250 mm) in front of the sensor,
    /// in a seed-dependent orientation, with a drape hiding `occlusion` of
    /// the visible points.
    pub fn synthetic(shape: Shape, seed: u64, noise_sigma_mm: f64, occlusion: f64, perturbation: Perturbation) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ee_d0f5_ce7e);
        let rotation = random_rotation(&mut rng);
        // The small ear is captured from closer so it spans a similar pixel area.
        let depth = if shape == Shape::Ear { 250.0 } else { 450.0 };
        let lateral = Vector3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), depth);
        let drape_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let camera_pose = RigidTransform::from_axis_angle(
            &Vector3::new(0.2, 1.0, 0.1),
            20f64.to_radians(),
            Vector3::new(120.0, 1450.0, -300.0),
            FrameId::DepthSensor,
            FrameId::World,
        );
        let ground_truth_pose =
            RigidTransform::new_projected(rotation, lateral, FrameId::ModelCt, FrameId::DepthSensor, 1e-9)
                .expect("random rotation is orthonormal");
        let occlusion = if occlusion > 0.0 {
            vec![Cutout::Drape { direction: [drape_angle.cos(), drape_angle.sin(), 0.0], fraction: occlusion }]
        } else {
            Vec::new()
        };
        Self {
            seed,
            mesh: MeshSource::Shape(shape),
            resolution: default_resolution(),
            fov_y_deg: DEFAULT_FOV_Y_DEG,
            camera_pose,
            ground_truth_pose,
            sensor: SensorModel { gaussian_sigma_mm: noise_sigma_mm, ..SensorModel::default() },
            occlusion,
            init_perturbation: perturbation,
            stylus_samples: default_stylus(),
            model: SamplingConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.model.validate()?;
        if self.camera_pose.from_frame() != FrameId::DepthSensor || self.camera_pose.to_frame() != FrameId::World {
            return Err(Error::InvalidInput("camera_pose must map depth_sensor to world".into()));
        }
        if self.ground_truth_pose.from_frame() != FrameId::ModelCt
            || self.ground_truth_pose.to_frame() != FrameId::DepthSensor
        {
            return Err(Error::InvalidInput("ground_truth_pose must map model_ct to depth_sensor".into()));
        }
        let p = self.init_perturbation;
        if !(p.rot_sigma_deg >= 0.0 && p.trans_sigma_mm >= 0.0) {
            return Err(Error::InvalidInput("perturbation sigmas must be non-negative".into()));
        }
        if self.stylus_samples < 3 {
            return Err(Error::InvalidInput("at least 3 stylus samples are required".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| {
            let location = e.span().map_or_else(|| "unknown".to_string(), |s| format!("byte {}", s.start));
            Error::parse("scenario", location, e.message())
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    /// Occluded depth capture, DepthSensor frame.
    pub scene: PointCloud,
    /// Exact surface point behind each scene point.
    pub scene_truth: Vec<Vector3<f64>>,
    pub mesh: TriangleMesh,
    pub model: PreparedModel,
    /// DepthSensor ← ModelCt.
    pub ground_truth: RigidTransform,
    /// Perturbed ground truth, DepthSensor ← ModelCt.
    pub init_sensor: RigidTransform,
    /// Perturbed ground truth, World ← ModelCt.
    pub init: InitialPose,
    pub world_from_sensor: RigidTransform,
    pub stylus: CalibrationSamples,
    pub occluded_fraction: f64,
    pub seeds: ScenarioSeeds,
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let seeds = ScenarioSeeds::derive(spec.seed);
    let mesh = spec.mesh.load()?;
    let model = prepare_model(&mesh, &spec.model)?;
    let gt = spec.ground_truth_pose;
    let posed = mesh.map_vertices(|v| gt.transform_point(v));
    let intrinsics = Intrinsics::from_fov(spec.resolution[0], spec.resolution[1], spec.fov_y_deg)?;
    let capture = render_depth_capture(&posed, &intrinsics, &spec.sensor, seeds.render)?;
    let occluded = occlude(&capture.cloud, &spec.occlusion)?;
    if occluded.empty {
        return Err(Error::NoVisibleSurface);
    }
    let scene_truth: Vec<Vector3<f64>> = occluded.kept.iter().map(|&i| capture.truth[i]).collect();

    let p = spec.init_perturbation;
    let init_sensor = perturb_pose(&gt, p.rot_sigma_deg, p.trans_sigma_mm, seeds.perturb);
    let init = InitialPose::new(spec.camera_pose.compose(&init_sensor)?)?;

    if scene_truth.len() < spec.stylus_samples {
        return Err(Error::InsufficientData { needed: spec.stylus_samples, got: scene_truth.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.stylus);
    let mut picks = rand::seq::index::sample(&mut rng, scene_truth.len(), spec.stylus_samples).into_vec();
    picks.sort_unstable();
    let stylus = CalibrationSamples::new(picks.iter().map(|&i| scene_truth[i]).collect())?;

    Ok(Scenario {
        scene: occluded.cloud,
        scene_truth,
        mesh,
        model,
        ground_truth: gt,
        init_sensor,
        init,
        world_from_sensor: spec.camera_pose,
        stylus,
        occluded_fraction: occluded.removed_fraction,
        seeds,
    })
}

/// `t ∘ Δ` with `Δ` a random rigid motion of the source frame: rotation by
/// `|N(0, σ_rot)|` degrees about a uniform axis and a shift of `|N(0, σ_t)|`
/// mm in a uniform direction.
pub fn perturb_pose(t: &RigidTransform, rot_sigma_deg: f64, trans_sigma_mm: f64, seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
    let angle = (g() * rot_sigma_deg).abs().to_radians();
    let mut axis = Vector3::new(g(), g(), g());
    if axis.norm() == 0.0 {
        axis = Vector3::z();
    }
    let dir = Vector3::new(g(), g(), g());
    let dir = if dir.norm() == 0.0 { Vector3::x() } else { dir.normalize() };
    let shift = dir * (g() * trans_sigma_mm).abs();
    let from = t.from_frame();
    let delta = RigidTransform::from_axis_angle(&axis, angle, shift, from, from);
    t.compose(&delta).expect("delta maps the source frame to itself")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub rotation_deg: f64,
    pub translation_mm: f64,
}

pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform) -> Result<PoseError> {
    Ok(PoseError {
        rotation_deg: rotation_geodesic_deg(estimate, truth)?,
        translation_mm: (estimate.translation() - truth.translation()).norm(),
    })
}
