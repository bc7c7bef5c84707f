//! Rotation from translation-invariant edges by graduated non-convexity on
//! the truncated least-squares loss.
//!
//! The annealing parameter `mu` starts large (nearly convex surrogate) and is
//! divided by `gnc_mu_divisor` each iteration; as `mu → 0` the surrogate
//! recovers the truncated quadratic and the weights become binary.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::TimGraph;
use crate::error::{Error, Result};
use crate::geometry::weighted_rotation_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GncConfig {
    /// Inlier bound on edge residuals `‖Δp − R·Δq‖`, mm.
    pub rotation_noise_bound_mm: f64,
    /// Inlier bound on point residuals `‖p − (R·q + t)‖`, mm.
    pub translation_noise_bound_mm: f64,
    /// Initial annealing parameter; `None` derives it from the largest
    /// least-squares residual.
    pub gnc_mu_init: Option<f64>,
    pub gnc_mu_divisor: f64,
    pub max_gnc_iterations: usize,
}

impl Default for GncConfig {
    fn default() -> Self {
        Self {
            rotation_noise_bound_mm: 10.0,
            translation_noise_bound_mm: 5.0,
            gnc_mu_init: None,
            gnc_mu_divisor: 1.4,
            max_gnc_iterations: 64,
        }
    }
}

impl GncConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rotation_noise_bound_mm > 0.0 && self.translation_noise_bound_mm > 0.0) {
            return Err(Error::InvalidInput("GNC noise bounds must be positive".into()));
        }
        if !(self.gnc_mu_divisor > 1.0) {
            return Err(Error::InvalidInput("gnc_mu_divisor must exceed 1".into()));
        }
        if self.gnc_mu_init.is_some_and(|m| !(m > 0.0)) {
            return Err(Error::InvalidInput("gnc_mu_init must be positive".into()));
        }
        if self.max_gnc_iterations == 0 {
            return Err(Error::InvalidInput("max_gnc_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GncRotation {
    pub rotation: Matrix3<f64>,
    /// Final per-edge weights in `[0, 1]`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration budget ran out before the weights became
    /// binary; `rotation` is then the best truncated-cost iterate seen.
    pub converged: bool,
}

impl GncRotation {
    pub fn inlier_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().enumerate().filter(|(_, &w)| w > 0.5).map(|(i, _)| i)
    }
}

/// TLS surrogate weight for squared residual `r2` at annealing level `mu`
/// and squared bound `c2`.
fn tls_weight(r2: f64, mu: f64, c2: f64) -> f64 {
    // Expressed with m = 1/mu so that m → ∞ recovers plain TLS.
    let m = 1.0 / mu;
    let upper = (m + 1.0) / m * c2;
    let lower = m / (m + 1.0) * c2;
    if r2 >= upper {
        0.0
    } else if r2 <= lower {
        1.0
    } else {
        (c2 / r2).sqrt() * (m * (m + 1.0)).sqrt() - m
    }
}

fn residuals_sq(graph: &TimGraph, r: &Matrix3<f64>) -> Vec<f64> {
    graph.edges.iter().map(|e| (e.scene_delta - r * e.model_delta).norm_squared()).collect()
}

fn check_edges(graph: &TimGraph) -> Result<()> {
    let usable: Vec<&Vector3<f64>> = graph.edges.iter().map(|e| &e.model_delta).filter(|d| d.norm() > 0.0).collect();
    if usable.len() < 3 {
        return Err(Error::DegenerateEdges);
    }
    let mut scatter = Matrix3::zeros();
    for d in &usable {
        let u = d.normalize();
        scatter += u * u.transpose();
    }
    let eig = scatter.symmetric_eigenvalues();
    let mut sorted = [eig[0], eig[1], eig[2]];
    sorted.sort_by(f64::total_cmp);
    if sorted[1] <= 1e-9 * sorted[2] {
        return Err(Error::DegenerateEdges);
    }
    Ok(())
}

pub fn gnc_tls_rotation(graph: &TimGraph, cfg: &GncConfig) -> Result<GncRotation> {
    cfg.validate()?;
    check_edges(graph)?;
    let model: Vec<Vector3<f64>> = graph.edges.iter().map(|e| e.model_delta).collect();
    let scene: Vec<Vector3<f64>> = graph.edges.iter().map(|e| e.scene_delta).collect();
    let c2 = cfg.rotation_noise_bound_mm * cfg.rotation_noise_bound_mm;
    let truncated_cost = |res: &[f64]| res.iter().map(|&r| r.min(c2)).sum::<f64>();

    let mut weights = vec![1.0; graph.len()];
    let mut rotation = weighted_rotation_fit(&model, &scene, &weights)?;
    let mut residuals = residuals_sq(graph, &rotation);
    let max_r2 = residuals.iter().cloned().fold(0.0, f64::max);
    if max_r2 <= c2 {
        return Ok(GncRotation { rotation, weights, iterations: 0, converged: true });
    }
    let mut mu = cfg.gnc_mu_init.unwrap_or(2.0 * max_r2 / c2 - 1.0);
    let mut best = (truncated_cost(&residuals), rotation, weights.clone());

    for iteration in 1..=cfg.max_gnc_iterations {
        for (w, &r2) in weights.iter_mut().zip(&residuals) {
            *w = tls_weight(r2, mu, c2);
        }
        rotation = match weighted_rotation_fit(&model, &scene, &weights) {
            Ok(r) => r,
            Err(_) => break,
        };
        residuals = residuals_sq(graph, &rotation);
        let cost = truncated_cost(&residuals);
        if cost < best.0 {
            best = (cost, rotation, weights.clone());
        }
        let binary = weights.iter().all(|&w| w == 0.0 || w == 1.0);
        if binary {
            // Weights match the final rotation's residual classification.
            for (w, &r2) in weights.iter_mut().zip(&residuals) {
                *w = if r2 <= c2 { 1.0 } else { 0.0 };
            }
            return Ok(GncRotation { rotation, weights, iterations: iteration, converged: true });
        }
        mu /= cfg.gnc_mu_divisor;
    }
    log::warn!("GNC-TLS did not reach binary weights in {} iterations", cfg.max_gnc_iterations);
    let (_, rotation, _) = best;
    let residuals = residuals_sq(graph, &rotation);
    let weights = residuals.iter().map(|&r2| if r2 <= c2 { 1.0 } else { 0.0 }).collect();
    Ok(GncRotation { rotation, weights, iterations: cfg.max_gnc_iterations, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::TimEdge;

    #[test]
    fn weight_limits() {
        let c2 = 4.0;
        assert_eq!(tls_weight(0.0, 10.0, c2), 1.0);
        assert_eq!(tls_weight(1e6, 10.0, c2), 0.0);
        // Far into annealing the surrogate is a hard threshold at c².
        assert_eq!(tls_weight(3.99, 1e-9, c2), 1.0);
        assert_eq!(tls_weight(4.01, 1e-9, c2), 0.0);
        let w = tls_weight(4.0, 1.0, c2);
        assert!(w > 0.0 && w < 1.0);
    }

    #[test]
    fn parallel_edges_are_degenerate() {
        let e = |s: f64| TimEdge { a: 0, b: 1, scene_delta: Vector3::x() * s, model_delta: Vector3::x() * s };
        let g = TimGraph { edges: vec![e(1.0), e(2.0), e(-3.0), e(4.0)] };
        assert!(matches!(gnc_tls_rotation(&g, &GncConfig::default()), Err(Error::DegenerateEdges)));
        assert!(matches!(gnc_tls_rotation(&TimGraph::default(), &GncConfig::default()), Err(Error::DegenerateEdges)));
    }
}
