use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Volume whose interior is hidden from the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutout {
    /// Removes points with `n·p > offset`.
    HalfSpace {
        normal: [f64; 3],
        offset_mm: f64,
    },
    Sphere {
        center: [f64; 3],
        radius_mm: f64,
    },
    /// Half-space along `direction` placed so that `fraction` of the
    /// current points fall inside.
    Drape {
        direction: [f64; 3],
        fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Occluded {
    pub cloud: PointCloud,
    /// Indices into the input cloud that were kept, in order.
    pub kept: Vec<usize>,
    pub removed_fraction: f64,
    /// True when nothing remains.
    pub empty: bool,
}

fn unit(v: [f64; 3]) -> Result<Vector3<f64>> {
    let v = Vector3::from(v);
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput("cutout direction must be non-zero".into()));
    }
    Ok(v / n)
}

/// Removes every point inside any cutout; cutouts apply in order.
pub fn occlude(cloud: &PointCloud, cutouts: &[Cutout]) -> Result<Occluded> {
    let points = cloud.points();
    let mut kept: Vec<usize> = (0..points.len()).collect();
    for cutout in cutouts {
        match *cutout {
            Cutout::HalfSpace { normal, offset_mm } => {
                let n = unit(normal)?;
                kept.retain(|&i| n.dot(&points[i]) <= offset_mm);
            }
            Cutout::Sphere { center, radius_mm } => {
                let c = Vector3::from(center);
                kept.retain(|&i| (points[i] - c).norm() > radius_mm);
            }
            Cutout::Drape { direction, fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::InvalidInput(format!("drape fraction {fraction} outside [0, 1]")));
                }
                let n = unit(direction)?;
                let remove = (fraction * kept.len() as f64).round() as usize;
                let mut by_height: Vec<usize> = kept.clone();
                by_height.sort_by(|&a, &b| n.dot(&points[b]).total_cmp(&n.dot(&points[a])).then(a.cmp(&b)));
                let mut hidden = vec![false; points.len()];
                for &i in &by_height[..remove] {
                    hidden[i] = true;
                }
                kept.retain(|&i| !hidden[i]);
            }
        }
    }
    let removed_fraction = if points.is_empty() { 0.0 } else { 1.0 - kept.len() as f64 / points.len() as f64 };
    let empty = kept.is_empty();
    if empty && !points.is_empty() {
        log::warn!("occlusion removed every point");
    }
    Ok(Occluded { cloud: cloud.select(&kept), kept, removed_fraction, empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;

    fn grid() -> PointCloud {
        let pts = (0..10).flat_map(|i| (0..10).map(move |j| Vector3::new(i as f64, j as f64, 0.0))).collect();
        PointCloud::new(pts, FrameId::DepthSensor).unwrap()
    }

    #[test]
    fn empty_spec_is_identity() {
        let c = grid();
        let o = occlude(&c, &[]).unwrap();
        assert_eq!(o.cloud, c);
        assert_eq!(o.removed_fraction, 0.0);
    }

    #[test]
    fn drape_removes_requested_fraction() {
        let o = occlude(&grid(), &[Cutout::Drape { direction: [1.0, 0.2, 0.0], fraction: 0.3 }]).unwrap();
        assert_eq!(o.cloud.len(), 70);
        assert!(o.cloud.points().iter().all(|p| p.x <= 7.0));
    }

    #[test]
    fn sphere_containing_all() {
        let o = occlude(&grid(), &[Cutout::Sphere { center: [4.5, 4.5, 0.0], radius_mm: 100.0 }]).unwrap();
        assert!(o.empty);
        assert_eq!(o.removed_fraction, 1.0);
    }
}
