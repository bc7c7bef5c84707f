use std::fmt;

use crate::geometry::FrameId;

/// Pipeline stage a failure originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Bias,
    Roi,
    Normals,
    Coarse,
    Fine,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Bias => "bias",
            Stage::Roi => "roi",
            Stage::Normals => "normals",
            Stage::Coarse => "coarse",
            Stage::Fine => "fine",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frame mismatch: expected {expected:?}, found {found:?}")]
    FrameMismatch { expected: FrameId, found: FrameId },

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error in {context} at {location}: {message}")]
    Parse { context: String, location: String, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("requested {requested} points but input has only {available}")]
    TargetExceedsInput { requested: usize, available: usize },

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("need at least {needed} correspondences, got {got}")]
    TooFewCorrespondences { needed: usize, got: usize },

    #[error("translation-invariant edges are degenerate (parallel or zero length)")]
    DegenerateEdges,

    #[error("no inlier correspondences")]
    NoInliers,

    #[error("coarse registration failed: inlier fraction {inlier_fraction:.3} below {minimum:.3}")]
    CoarseFailed { inlier_fraction: f64, minimum: f64 },

    #[error("no correspondences survived rejection")]
    NoCorrespondences,

    #[error("no visible surface")]
    NoVisibleSurface,

    #[error("insufficient data: need {needed} samples per group, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no reference point lies within {threshold_mm} mm of the overlay")]
    NothingCovered { threshold_mm: f64 },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), location: location.into(), message: message.into() }
    }

    pub(crate) fn at_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    /// Stage tag of a pipeline failure, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// The underlying error with any stage tag stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
