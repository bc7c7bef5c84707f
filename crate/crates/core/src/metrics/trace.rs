//! Tracing-reliability protocol: the same skin surface and internal structure
//! are traced twice (tracked tool vs CT segmentation). After a rigid ICP
//! alignment of the two surfaces, each surface point's distance to its own
//! internal structure is compared with that of its nearest counterpart.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{compare_distance_maps, nn_pairing, relative_distance_map, ErrorSummary};
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, PointCloud, RigidTransform, DEFAULT_NORMAL_K};
use crate::registration::{refine_icp, IcpConfig, IcpDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceEvalConfig {
    /// Neighbors for the AR surface normals used by ICP.
    pub normal_k: usize,
    pub icp: IcpConfig,
}

impl Default for TraceEvalConfig {
    fn default() -> Self {
        Self { normal_k: DEFAULT_NORMAL_K, icp: IcpConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvalResult {
    /// Summary of `|d_AR − d_CT|` over the AR surface points.
    pub summary: ErrorSummary,
    /// AR ← CT alignment found by ICP.
    pub alignment: RigidTransform,
    pub icp: IcpDiagnostics,
}

fn same_frame(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.frame() != b.frame() {
        return Err(Error::FrameMismatch { expected: a.frame(), found: b.frame() });
    }
    Ok(())
}

/// Point counts may differ between the two tracings; points are paired by
/// nearest neighbor after alignment.
pub fn trace_eval(
    ar_surface: &PointCloud,
    ar_internal: &PointCloud,
    ct_surface: &PointCloud,
    ct_internal: &PointCloud,
    cfg: &TraceEvalConfig,
) -> Result<TraceEvalResult> {
    same_frame(ar_surface, ar_internal)?;
    same_frame(ct_surface, ct_internal)?;
    let (Some(ar_c), Some(ct_c)) = (ar_surface.centroid(), ct_surface.centroid()) else {
        return Err(Error::EmptyCloud);
    };
    let scene = estimate_normals(&ar_surface.clone().without_normals(), cfg.normal_k, &Vector3::zeros())?;
    let init = RigidTransform::from_translation(ar_c - ct_c, ct_surface.frame(), ar_surface.frame());
    let fit = refine_icp(&scene, ct_surface, &init, &cfg.icp)?;

    let d_ar = relative_distance_map(ar_surface, ar_internal)?;
    // Distances are rigid invariants, so d_CT needs no transform.
    let d_ct = relative_distance_map(ct_surface, ct_internal)?;
    let aligned = fit.pose.apply(ct_surface)?;
    let pairing = nn_pairing(ar_surface, &aligned)?;
    Ok(TraceEvalResult {
        summary: compare_distance_maps(&d_ar, &d_ct, &pairing)?,
        alignment: fit.pose,
        icp: fit.diagnostics,
    })
}
