use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationEstimate {
    pub translation: Vector3<f64>,
    /// Positions (into the input pairs) within the bound at the solution.
    pub inliers: Vec<usize>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Truncated least-squares translation `argmin_t Σ ρ(‖p − (R q + t)‖)` by
/// iterative reweighting from the component-wise median of `p − R q`.
pub fn robust_translation(
    pairs: &[(Vector3<f64>, Vector3<f64>)],
    rotation: &Matrix3<f64>,
    noise_bound_mm: f64,
) -> Result<TranslationEstimate> {
    if pairs.is_empty() {
        return Err(Error::NoInliers);
    }
    let offsets: Vec<Vector3<f64>> = pairs.iter().map(|(p, q)| p - rotation * q).collect();
    let mut t = Vector3::from_fn(|k, _| median(&mut offsets.iter().map(|o| o[k]).collect::<Vec<_>>()));
    let bound2 = noise_bound_mm * noise_bound_mm;
    let inliers_at = |t: &Vector3<f64>| -> Vec<usize> {
        (0..offsets.len()).filter(|&i| (offsets[i] - t).norm_squared() <= bound2).collect()
    };
    let mut inliers = inliers_at(&t);
    for _ in 0..MAX_ROUNDS {
        if inliers.is_empty() {
            break;
        }
        let next = inliers.iter().fold(Vector3::zeros(), |acc, &i| acc + offsets[i]) / inliers.len() as f64;
        let next_inliers = inliers_at(&next);
        let stable = next_inliers == inliers;
        t = next;
        inliers = next_inliers;
        if stable {
            break;
        }
    }
    Ok(TranslationEstimate { translation: t, inliers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_is_exact() {
        let r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let (p, q) = (Vector3::new(3.0, 4.0, 5.0), Vector3::new(1.0, 2.0, 3.0));
        let est = robust_translation(&[(p, q)], &r, 1.0).unwrap();
        assert_eq!(est.translation, p - r * q);
        assert_eq!(est.inliers, vec![0]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(robust_translation(&[], &Matrix3::identity(), 1.0), Err(Error::NoInliers)));
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
