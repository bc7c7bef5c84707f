//! Depth-only markerless surface registration.
//!
//! The pipeline aligns a CT-derived skin model to a depth-sensor point cloud:
//! depth-bias correction from stylus samples, ROI cropping around a
//! user-provided initial pose, FPFH + GNC-TLS coarse alignment, and robust
//! point-to-plane ICP. Evaluation metrics and a synthetic capture simulator
//! with known ground truth are included.
//!
//! All lengths are millimeters.

pub mod calibration;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod registration;
pub mod sampling;
pub mod simulator;

pub use error::{Error, Result, Stage};
pub use geometry::{FrameId, PointCloud, RigidTransform};
