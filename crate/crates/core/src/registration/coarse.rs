//! Global alignment: FPFH matching, translation-invariant measurements,
//! GNC-TLS rotation and robust translation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::clique::{max_clique, ConsistencyGraph, RotationPrior};
use super::{
    build_tims, compute_fpfh, gnc_tls_rotation, match_fpfh_among, match_fpfh_top_k, robust_translation,
    CorrespondenceSet, FpfhDescriptor, GncConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{
    estimate_normals, rotation_angle_deg, NearestNeighborIndex, PointCloud, RigidTransform, DEFAULT_NORMAL_K,
};
use crate::sampling::voxel_downsample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoarseConfig {
    /// Voxel size both clouds are reduced to before feature extraction, mm.
    pub voxel_mm: f64,
    pub normal_k: usize,
    pub feature_radius_mm: f64,
    pub mutual: bool,
    /// Candidate model matches kept per scene point.
    pub matches_per_point: usize,
    /// TIM edges sampled per correspondence.
    pub edge_budget_factor: usize,
    /// Keep only the largest mutually length-consistent set of
    /// correspondences before estimating the rotation.
    pub max_clique: bool,
    pub clique_node_budget: usize,
    /// Largest angle between a scene difference vector and the prior-rotated
    /// model difference vector for the two to count as consistent.
    pub prior_max_angle_deg: f64,
    /// With a prior pose, a scene point is matched only against model points
    /// within this distance of where the prior places it, mm.
    pub prior_window_mm: Option<f64>,
    pub seed: u64,
    pub gnc: GncConfig,
    pub min_inlier_fraction: f64,
    pub min_points: usize,
    /// Sensor origin used to orient scene normals, mm.
    pub viewpoint: [f64; 3],
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self {
            voxel_mm: 4.0,
            normal_k: DEFAULT_NORMAL_K,
            feature_radius_mm: 30.0,
            mutual: true,
            matches_per_point: 5,
            edge_budget_factor: 4,
            max_clique: true,
            clique_node_budget: 20_000,
            prior_max_angle_deg: 20.0,
            prior_window_mm: Some(60.0),
            seed: 0,
            gnc: GncConfig { rotation_noise_bound_mm: 4.0, ..GncConfig::default() },
            min_inlier_fraction: 0.005,
            min_points: 50,
            viewpoint: [0.0; 3],
        }
    }
}

impl CoarseConfig {
    pub fn validate(&self) -> Result<()> {
        self.gnc.validate()?;
        if !(self.voxel_mm > 0.0 && self.feature_radius_mm > 0.0) {
            return Err(Error::InvalidInput("coarse voxel and feature radius must be positive".into()));
        }
        if !(self.prior_max_angle_deg > 0.0 && self.prior_max_angle_deg <= 180.0) {
            return Err(Error::InvalidInput("prior_max_angle_deg must lie in (0, 180]".into()));
        }
        if self.prior_window_mm.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::InvalidInput("prior_window_mm must be positive".into()));
        }
        if self.normal_k < 3 {
            return Err(Error::InvalidInput("coarse normal_k must be at least 3".into()));
        }
        if self.matches_per_point == 0 {
            return Err(Error::InvalidInput("matches_per_point must be at least 1".into()));
        }
        if self.edge_budget_factor == 0 {
            return Err(Error::InvalidInput("edge_budget_factor must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_inlier_fraction) {
            return Err(Error::InvalidInput("min_inlier_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseDiagnostics {
    pub scene_points: usize,
    pub model_points: usize,
    pub correspondences: usize,
    /// Correspondences in the largest consistent clique (all of them when
    /// clique pruning is off).
    pub clique_size: usize,
    pub edges: usize,
    /// Edges left after the length-consistency check.
    pub consistent_edges: usize,
    pub gnc_iterations: usize,
    pub gnc_converged: bool,
    /// Correspondences touched by at least one surviving edge.
    pub rotation_inliers: usize,
    pub translation_inliers: usize,
    /// `translation_inliers / scene_points`.
    pub inlier_fraction: f64,
    /// Rotation angle between the estimate and the prior, when one was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_deviation_deg: Option<f64>,
}

impl CoarseDiagnostics {
    /// Whether the estimate strays from the prior by more than the gate
    /// angle used to build it.
    pub fn contradicts_prior(&self, cfg: &CoarseConfig) -> bool {
        self.prior_deviation_deg.is_some_and(|d| d > cfg.prior_max_angle_deg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseResult {
    /// Scene ← model.
    pub pose: RigidTransform,
    pub diagnostics: CoarseDiagnostics,
}

fn failed(inlier_fraction: f64, cfg: &CoarseConfig) -> Error {
    Error::CoarseFailed { inlier_fraction, minimum: cfg.min_inlier_fraction }
}

/// Model normals come from the mesh; without them they are estimated and
/// pointed away from the model centroid.
fn model_with_normals(model: &PointCloud, k: usize) -> Result<PointCloud> {
    if model.has_normals() {
        return Ok(model.clone());
    }
    let centroid = model.centroid().ok_or(Error::EmptyCloud)?;
    let inward = estimate_normals(model, k, &centroid)?;
    let normals = inward.normals().expect("just estimated").iter().map(|n| -n).collect();
    PointCloud::with_normals(inward.points().to_vec(), normals, model.frame())
}

/// Estimates the scene ← model pose from scratch.
pub fn coarse_register(scene: &PointCloud, model: &PointCloud, cfg: &CoarseConfig) -> Result<CoarseResult> {
    coarse_register_with_prior(scene, model, cfg, None)
}

/// As [`coarse_register`], with an approximate scene ← model pose. Its
/// rotation rules out correspondence pairs implying a very different
/// orientation (such as the mirror-like flips smooth surfaces otherwise
/// admit); with `prior_window_mm` set, it also limits where each scene point
/// looks for its feature matches.
pub fn coarse_register_with_prior(
    scene: &PointCloud,
    model: &PointCloud,
    cfg: &CoarseConfig,
    prior: Option<&RigidTransform>,
) -> Result<CoarseResult> {
    cfg.validate()?;
    if let Some(p) = prior {
        if p.from_frame() != model.frame() {
            return Err(Error::FrameMismatch { expected: model.frame(), found: p.from_frame() });
        }
        if p.to_frame() != scene.frame() {
            return Err(Error::FrameMismatch { expected: scene.frame(), found: p.to_frame() });
        }
    }
    let scene_ds = voxel_downsample(scene, cfg.voxel_mm)?;
    let model_ds = voxel_downsample(model, cfg.voxel_mm)?;
    let k = cfg.normal_k;
    if scene_ds.len() < cfg.min_points.max(k) || model_ds.len() < cfg.min_points.max(k) {
        log::warn!(
            "coarse alignment needs {} points per cloud, have scene {} / model {}",
            cfg.min_points.max(k),
            scene_ds.len(),
            model_ds.len()
        );
        return Err(failed(0.0, cfg));
    }
    let viewpoint = Vector3::from(cfg.viewpoint);
    // Normals estimated on the full-resolution scene and averaged per voxel
    // are steadier than normals re-estimated on the sparse cloud.
    let scene_n = if scene_ds.has_normals() { scene_ds } else { estimate_normals(&scene_ds, k, &viewpoint)? };
    let model_n = model_with_normals(&model_ds, k)?;

    let scene_desc = compute_fpfh(&scene_n, cfg.feature_radius_mm)?;
    let model_desc = compute_fpfh(&model_n, cfg.feature_radius_mm)?;
    let features = Features { scene: &scene_n, model: &model_n, scene_desc: &scene_desc, model_desc: &model_desc };
    let corrs = match (prior, cfg.prior_window_mm) {
        (Some(pose), Some(window)) => features.guided(pose.rotation(), pose.translation(), window, cfg)?,
        _ => match_fpfh_top_k(&scene_desc, &model_desc, cfg.matches_per_point, cfg.mutual)?,
    };
    let gate = prior.map(|p| RotationPrior { rotation: *p.rotation(), max_angle_deg: cfg.prior_max_angle_deg });
    let best = features.estimate(corrs, gate, cfg)?;
    let mut diagnostics = best.diagnostics;
    diagnostics.prior_deviation_deg = prior.map(|p| rotation_angle_deg(&(best.rotation * p.rotation().transpose())));
    log::debug!("coarse: {diagnostics:?}");
    if diagnostics.inlier_fraction < cfg.min_inlier_fraction || diagnostics.translation_inliers < 3 {
        return Err(failed(diagnostics.inlier_fraction, cfg));
    }
    let pose = RigidTransform::new_projected(best.rotation, best.translation, model.frame(), scene.frame(), 1e-6)?;
    Ok(CoarseResult { pose, diagnostics })
}

struct Features<'a> {
    scene: &'a PointCloud,
    model: &'a PointCloud,
    scene_desc: &'a [FpfhDescriptor],
    model_desc: &'a [FpfhDescriptor],
}

struct Estimate {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    diagnostics: CoarseDiagnostics,
}

impl Features<'_> {
    /// Feature matches restricted to model points within `window` of where
    /// the pose `(rotation, translation)` places each scene point.
    fn guided(
        &self,
        rotation: &Matrix3<f64>,
        translation: &Vector3<f64>,
        window: f64,
        cfg: &CoarseConfig,
    ) -> Result<CorrespondenceSet> {
        let index = NearestNeighborIndex::new(self.model.points());
        let inv_r = rotation.transpose();
        let candidates: Vec<Vec<usize>> = self
            .scene
            .points()
            .iter()
            .map(|p| index.within_radius(&(inv_r * (p - translation)), window).into_iter().map(|n| n.index).collect())
            .collect();
        match_fpfh_among(self.scene_desc, self.model_desc, &candidates, cfg.matches_per_point)
    }

    /// Clique pruning, GNC-TLS rotation and robust translation on one
    /// correspondence set.
    fn estimate(&self, corrs: CorrespondenceSet, gate: Option<RotationPrior>, cfg: &CoarseConfig) -> Result<Estimate> {
        let (scene_n, model_n) = (self.scene, self.model);
        let mut diagnostics = CoarseDiagnostics {
            scene_points: scene_n.len(),
            model_points: model_n.len(),
            correspondences: corrs.len(),
            clique_size: corrs.len(),
            edges: 0,
            consistent_edges: 0,
            gnc_iterations: 0,
            gnc_converged: false,
            rotation_inliers: 0,
            translation_inliers: 0,
            inlier_fraction: 0.0,
            prior_deviation_deg: None,
        };
        if corrs.len() < 3 {
            return Err(failed(0.0, cfg));
        }
        let corrs = if cfg.max_clique {
            let consistency =
                ConsistencyGraph::build(&corrs, scene_n, model_n, cfg.gnc.rotation_noise_bound_mm, gate.as_ref());
            let clique = max_clique(&consistency, cfg.clique_node_budget);
            log::debug!(
                "consistency graph: {} vertices, {} edges, clique {}",
                consistency.len(),
                consistency.edge_count(),
                clique.len()
            );
            corrs.subset(&clique)
        } else {
            corrs
        };
        diagnostics.clique_size = corrs.len();
        if corrs.len() < 3 {
            return Err(failed(0.0, cfg));
        }
        let budget = corrs.len().saturating_mul(cfg.edge_budget_factor);
        let mut graph = build_tims(&corrs, scene_n, model_n, budget, cfg.seed)?;
        diagnostics.edges = graph.len();
        graph.retain_length_consistent(cfg.gnc.rotation_noise_bound_mm);
        diagnostics.consistent_edges = graph.len();
        let rotation = match gnc_tls_rotation(&graph, &cfg.gnc) {
            Ok(r) => r,
            Err(Error::DegenerateEdges) => return Err(failed(0.0, cfg)),
            Err(e) => return Err(e),
        };
        diagnostics.gnc_iterations = rotation.iterations;
        diagnostics.gnc_converged = rotation.converged;

        let mut voted = vec![false; corrs.len()];
        for e in rotation.inlier_edges() {
            voted[graph.edges[e].a] = true;
            voted[graph.edges[e].b] = true;
        }
        let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = (0..corrs.len())
            .filter(|&i| voted[i])
            .map(|i| {
                let c = corrs.pairs()[i];
                (scene_n.points()[c.scene], model_n.points()[c.model])
            })
            .collect();
        diagnostics.rotation_inliers = pairs.len();
        if pairs.is_empty() {
            return Err(failed(0.0, cfg));
        }
        let translation = robust_translation(&pairs, &rotation.rotation, cfg.gnc.translation_noise_bound_mm)?;
        diagnostics.translation_inliers = translation.inliers.len();
        diagnostics.inlier_fraction = translation.inliers.len() as f64 / scene_n.len() as f64;
        Ok(Estimate { rotation: rotation.rotation, translation: translation.translation, diagnostics })
    }
}
