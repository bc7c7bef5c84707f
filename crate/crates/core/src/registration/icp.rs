//! Robust point-to-plane ICP.
//!
//! Each scene point is paired with its nearest model point under the current
//! pose; the residual is measured along the scene normal. The monitored
//! objective is the mean Tukey loss over all scene points,
//! `E(T) = (1/N) Σ ρ_c(r_p)`, reported as `sqrt(2E)` in mm (which equals the
//! RMS residual when every residual is well inside `c`). Steps that would
//! increase `E` are halved until they do not, so the logged objective never
//! rises. The stopping tolerance applies to the decrease of `E` mapped to mm
//! the same way, `sqrt(2ΔE)`: the objective itself is bounded by `c/√3`, so
//! differences of its square root shrink below any mm tolerance long before
//! the pose settles.

use nalgebra::{Matrix3, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_to_so3, NearestNeighborIndex, PointCloud, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauDecay {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub tau_start_mm: f64,
    pub tau_end_mm: f64,
    pub max_iterations: usize,
    pub objective_tol_mm: f64,
    pub tukey_constant_mm: f64,
    pub tau_decay: TauDecay,
    /// Step halvings tried before an iteration is declared non-descending.
    pub max_backtracks: usize,
    /// Reweighted solves per iteration while the pairs stay fixed.
    pub inner_iterations: usize,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            tau_start_mm: 5.0,
            tau_end_mm: 2.0,
            max_iterations: 30,
            objective_tol_mm: 0.5,
            tukey_constant_mm: 3.0,
            tau_decay: TauDecay::Linear,
            max_backtracks: 6,
            inner_iterations: 10,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_end_mm > 0.0 && self.tau_start_mm >= self.tau_end_mm) {
            return Err(Error::InvalidInput("ICP needs tau_start_mm >= tau_end_mm > 0".into()));
        }
        if self.max_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::InvalidInput("ICP max_iterations and inner_iterations must be at least 1".into()));
        }
        if !(self.tukey_constant_mm > 0.0) || !(self.objective_tol_mm >= 0.0) {
            return Err(Error::InvalidInput("ICP tukey constant must be positive and tolerance non-negative".into()));
        }
        Ok(())
    }

    /// Rejection threshold for 0-based iteration `k`.
    pub fn tau(&self, k: usize) -> f64 {
        let span = (self.max_iterations.max(2) - 1) as f64;
        let s = (k as f64 / span).min(1.0);
        match self.tau_decay {
            TauDecay::Linear => self.tau_start_mm + (self.tau_end_mm - self.tau_start_mm) * s,
            TauDecay::Exponential => self.tau_start_mm * (self.tau_end_mm / self.tau_start_mm).powf(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcpStop {
    /// Objective changed by less than the tolerance.
    Converged,
    MaxIterations,
    /// No step length reduced the objective.
    NoDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpIteration {
    pub iteration: usize,
    pub tau_mm: f64,
    /// Pairs that passed the `|r| ≤ τ` gate.
    pub correspondences: usize,
    /// Fraction of the solved step that was accepted.
    pub step_scale: f64,
    /// Objective after the iteration, mm.
    pub objective_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpDiagnostics {
    pub initial_objective_mm: f64,
    pub final_objective_mm: f64,
    pub iterations: usize,
    pub stop: IcpStop,
    pub history: Vec<IcpIteration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// `increment ∘ init`.
    pub pose: RigidTransform,
    /// Scene ← scene update accumulated over all iterations.
    pub increment: RigidTransform,
    pub diagnostics: IcpDiagnostics,
}

pub(crate) fn tukey_rho(r: f64, c: f64) -> f64 {
    let c2 = c * c;
    if r.abs() >= c {
        c2 / 6.0
    } else {
        let u = 1.0 - r * r / c2;
        c2 / 6.0 * (1.0 - u * u * u)
    }
}

fn tukey_weight(r: f64, c: f64) -> f64 {
    if r.abs() >= c {
        0.0
    } else {
        let u = 1.0 - (r / c) * (r / c);
        u * u
    }
}

struct Pairing {
    /// Model index paired with each scene point.
    nn: Vec<usize>,
    /// Transformed model point matched to each scene point.
    matched: Vec<Vector3<f64>>,
    residuals: Vec<f64>,
    energy: f64,
}

struct Problem<'a> {
    scene: &'a [Vector3<f64>],
    normals: &'a [Vector3<f64>],
    model: &'a [Vector3<f64>],
    index: NearestNeighborIndex,
    c: f64,
}

impl Problem<'_> {
    fn pair(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Pairing {
        let inv_r = rotation.transpose();
        let nn: Vec<usize> = self
            .scene
            .par_iter()
            .map(|p| self.index.nearest(&(inv_r * (p - translation))).expect("model is non-empty").index)
            .collect();
        self.with_pairs(nn, rotation, translation)
    }

    /// Residuals of fixed pairs under a pose.
    fn with_pairs(&self, nn: Vec<usize>, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Pairing {
        let (matched, residuals): (Vec<Vector3<f64>>, Vec<f64>) = nn
            .iter()
            .zip(self.scene.iter().zip(self.normals))
            .map(|(&j, (p, n))| {
                let q = rotation * self.model[j] + translation;
                (q, (q - p).dot(n))
            })
            .unzip();
        // Sequential sum keeps the objective independent of thread count.
        let energy = residuals.iter().map(|&r| tukey_rho(r, self.c)).sum::<f64>() / residuals.len() as f64;
        Pairing { nn, matched, residuals, energy }
    }

    /// Weighted Gauss-Newton step `(ω, v)` about the centroid of the gated
    /// model points, or `None` when the gate leaves too few pairs.
    fn solve(&self, pairing: &Pairing, tau: f64) -> (Option<(Vector3<f64>, Vector3<f64>, Vector3<f64>)>, usize) {
        let gated: Vec<usize> = (0..self.scene.len())
            .filter(|&i| pairing.residuals[i].abs() <= tau && tukey_weight(pairing.residuals[i], self.c) > 0.0)
            .collect();
        if gated.len() < 6 {
            return (None, gated.len());
        }
        let center = gated.iter().fold(Vector3::zeros(), |acc, &i| acc + pairing.matched[i]) / gated.len() as f64;
        let mut a = Matrix6::zeros();
        let mut b = Vector6::zeros();
        for &i in &gated {
            let r = pairing.residuals[i];
            let w = tukey_weight(r, self.c);
            let n = self.normals[i];
            let d = pairing.matched[i] - center;
            let arm = d.cross(&n);
            let j = Vector6::new(arm.x, arm.y, arm.z, n.x, n.y, n.z);
            a += w * j * j.transpose();
            b -= w * r * j;
        }
        let scale = a.diagonal().max().max(f64::MIN_POSITIVE);
        a += Matrix6::identity() * (1e-12 * scale);
        let Some(x) = a.cholesky().map(|ch| ch.solve(&b)) else {
            return (None, gated.len());
        };
        (Some((Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]), center)), gated.len())
    }
}

/// Small-angle update `p ↦ R(p − c) + c + v` with `R ≈ I + [ω]×` projected
/// back onto SO(3).
fn step_transform(omega: &Vector3<f64>, v: &Vector3<f64>, center: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let approx = Matrix3::identity() + omega.cross_matrix();
    let r = project_to_so3(&approx);
    (r, center - r * center + v)
}

fn objective_mm(energy: f64) -> f64 {
    (2.0 * energy).sqrt()
}

/// A decrease of `E` (mm²) expressed in mm the same way as the objective.
fn change_mm(before: f64, after: f64) -> f64 {
    (2.0 * (before - after).max(0.0)).sqrt()
}

/// Refines `init` (scene ← model) against a scene with normals.
pub fn refine_icp(scene: &PointCloud, model: &PointCloud, init: &RigidTransform, cfg: &IcpConfig) -> Result<IcpResult> {
    cfg.validate()?;
    let normals = scene.normals().ok_or(Error::MissingNormals)?;
    if init.from_frame() != model.frame() {
        return Err(Error::FrameMismatch { expected: model.frame(), found: init.from_frame() });
    }
    if init.to_frame() != scene.frame() {
        return Err(Error::FrameMismatch { expected: scene.frame(), found: init.to_frame() });
    }
    if scene.is_empty() || model.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    let problem = Problem {
        scene: scene.points(),
        normals,
        model: model.points(),
        index: NearestNeighborIndex::new(model.points()),
        c: cfg.tukey_constant_mm,
    };

    let mut rotation = *init.rotation();
    let mut translation = *init.translation();
    let mut pairing = problem.pair(&rotation, &translation);
    let initial_objective_mm = objective_mm(pairing.energy);
    let mut history = Vec::new();
    let mut stop = IcpStop::MaxIterations;

    for k in 0..cfg.max_iterations {
        let tau = cfg.tau(k);
        // Reweighted least squares on the current pairs.
        let (mut inner_r, mut inner_t) = (rotation, translation);
        let mut fixed = problem.with_pairs(pairing.nn.clone(), &rotation, &translation);
        let mut gated = 0;
        let mut center = None;
        for inner in 0..cfg.inner_iterations {
            let (step, n) = problem.solve(&fixed, tau);
            if inner == 0 {
                gated = n;
            }
            let Some((omega, v, c)) = step.filter(|(w, v, _)| w.iter().chain(v.iter()).all(|x| x.is_finite())) else {
                break;
            };
            center.get_or_insert(c);
            let (dr, dt) = step_transform(&omega, &v, &c);
            inner_r = project_to_so3(&(dr * inner_r));
            inner_t = dr * inner_t + dt;
            fixed = problem.with_pairs(fixed.nn, &inner_r, &inner_t);
            if omega.norm() < 1e-7 && v.norm() < 1e-5 {
                break;
            }
        }
        let Some(center) = center else {
            if k == 0 {
                return Err(Error::NoCorrespondences);
            }
            stop = IcpStop::NoDescent;
            break;
        };
        // Full update as a rotation about `center` plus a shift, so that it
        // can be shortened along a geodesic when it overshoots.
        let full_r = inner_r * rotation.transpose();
        let omega = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(full_r)).scaled_axis();
        let v = inner_t - full_r * translation - center + full_r * center;
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..=cfg.max_backtracks {
            let dr = Rotation3::new(omega * scale).into_inner();
            let dt = center - dr * center + v * scale;
            let cand_r = project_to_so3(&(dr * rotation));
            let cand_t = dr * translation + dt;
            if !(cand_r.iter().chain(cand_t.iter()).all(|x| x.is_finite())) {
                scale *= 0.5;
                continue;
            }
            let cand = problem.pair(&cand_r, &cand_t);
            if cand.energy <= pairing.energy {
                accepted = Some((cand_r, cand_t, cand));
                break;
            }
            scale *= 0.5;
        }
        let Some((new_r, new_t, new_pairing)) = accepted else {
            stop = IcpStop::NoDescent;
            break;
        };
        let change = change_mm(pairing.energy, new_pairing.energy);
        rotation = new_r;
        translation = new_t;
        pairing = new_pairing;
        history.push(IcpIteration {
            iteration: k + 1,
            tau_mm: tau,
            correspondences: gated,
            step_scale: scale,
            objective_mm: objective_mm(pairing.energy),
        });
        log::debug!(
            "icp iteration {}: objective {:.6} mm, tau {:.3} mm, {} pairs",
            k + 1,
            objective_mm(pairing.energy),
            tau,
            gated
        );
        if change < cfg.objective_tol_mm {
            stop = IcpStop::Converged;
            break;
        }
    }

    let pose = RigidTransform::new_projected(rotation, translation, init.from_frame(), init.to_frame(), 1e-6)?;
    let increment = pose.compose(&init.inverse())?;
    let pose = increment.compose(init)?;
    Ok(IcpResult {
        pose,
        increment,
        diagnostics: IcpDiagnostics {
            initial_objective_mm,
            final_objective_mm: objective_mm(pairing.energy),
            iterations: history.len(),
            stop,
            history,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tukey_saturates() {
        assert_eq!(tukey_rho(0.0, 3.0), 0.0);
        assert_eq!(tukey_rho(5.0, 3.0), 1.5);
        assert!((tukey_rho(0.01, 3.0) - 0.5e-4).abs() < 1e-8);
        assert_eq!(tukey_weight(3.0, 3.0), 0.0);
        assert_eq!(tukey_weight(0.0, 3.0), 1.0);
    }

    #[test]
    fn tau_schedules() {
        let cfg = IcpConfig::default();
        assert_eq!(cfg.tau(0), 5.0);
        assert!((cfg.tau(29) - 2.0).abs() < 1e-12);
        assert!((cfg.tau(100) - 2.0).abs() < 1e-12);
        let exp = IcpConfig { tau_decay: TauDecay::Exponential, ..cfg };
        assert!((exp.tau(29) - 2.0).abs() < 1e-12);
        assert!(exp.tau(10) < cfg.tau(10));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(IcpConfig { tau_start_mm: 1.0, ..Default::default() }.validate().is_err());
        assert!(IcpConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
    }
}
