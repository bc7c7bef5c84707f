use serde::{Deserialize, Serialize};

/// Right-handed coordinate frames taking part in registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameId {
    /// Preoperative CT-derived model frame.
    ModelCt,
    /// Depth sensor (camera) frame.
    DepthSensor,
    /// Headset world frame.
    World,
    /// External optical tracker frame.
    OpticalTracker,
}
