//! Frames, rigid transforms, point clouds and the shared geometric kernels
//! (nearest-neighbor search, normal estimation, Procrustes).
//!
//! Lengths are millimeters throughout.

mod cloud;
mod frame;
mod kdtree;
mod normals;
mod procrustes;
mod transform;

pub use cloud::PointCloud;
pub use frame::FrameId;
pub use kdtree::{NearestNeighborIndex, Neighbor};
pub use normals::{estimate_normals, estimate_normals_with, Neighborhood, DEFAULT_NORMAL_K};
pub use procrustes::{procrustes_fit, project_to_so3, weighted_rotation_fit, ProcrustesFit};
pub use transform::{rotation_angle_deg, rotation_geodesic_deg, RigidTransform};
