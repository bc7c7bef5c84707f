//! Coarse-to-fine rigid registration of a depth capture to a CT model.

mod clique;
mod coarse;
mod correspondence;
mod fpfh;
mod gnc;
mod icp;
mod pipeline;
mod tims;
mod translation;

pub use clique::{max_clique, ConsistencyGraph, RotationPrior};
pub use coarse::{coarse_register, coarse_register_with_prior, CoarseConfig, CoarseDiagnostics, CoarseResult};
pub use correspondence::{match_fpfh, match_fpfh_among, match_fpfh_top_k, Correspondence, CorrespondenceSet};
pub use fpfh::{compute_fpfh, FpfhDescriptor, FPFH_BINS, FPFH_DIM};
pub use gnc::{gnc_tls_rotation, GncConfig, GncRotation};
pub use icp::{refine_icp, IcpConfig, IcpDiagnostics, IcpIteration, IcpResult, IcpStop, TauDecay};
pub use pipeline::{
    register_full, BiasStage, FineStart, RegistrationConfig, RegistrationResult, RoiDiagnostics, StageTimings,
};
pub use tims::{build_tims, TimEdge, TimGraph};
pub use translation::{robust_translation, TranslationEstimate};
