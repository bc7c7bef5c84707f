//! Synthetic depth captures with known ground truth.

mod occlusion;
mod raycast;
mod scenario;
mod sensor;
mod shapes;
mod tracing;

pub use occlusion::{occlude, Cutout, Occluded};
pub use raycast::{intersect, RayCaster, RayHit};
pub use scenario::{
    generate_scenario, perturb_pose, pose_error, MeshSource, Perturbation, PoseError, Scenario, ScenarioSeeds,
    ScenarioSpec,
};
pub use sensor::{
    render_depth_capture, BiasField, DepthCapture, Intrinsics, SensorModel, DEFAULT_FOV_Y_DEG, DEFAULT_RESOLUTION,
};
pub use shapes::{sphere_mesh, Shape};
pub use tracing::{generate_trace_scenario, TraceScenario, TraceSpec};
