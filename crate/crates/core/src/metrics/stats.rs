use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub median_mm: f64,
    pub iqr_mm: f64,
    pub mean_mm: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for a single value).
    pub sd_mm: f64,
    pub p95_mm: f64,
    pub rmse_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    /// `median(a) − median(b)` on the subsamples.
    pub delta_median_mm: f64,
    pub median_a_mm: f64,
    pub median_b_mm: f64,
    /// Two-sided, add-one smoothed.
    pub p_value: f64,
    pub n_per_group: usize,
    pub n_permutations: usize,
    pub seed: u64,
}

/// Linear-interpolation quantile (Hyndman and Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(errors: &[f64]) -> Result<ErrorSummary> {
    if errors.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidInput("error values must be finite".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let ss: f64 = sorted.iter().map(|e| (e - mean) * (e - mean)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    let rmse = (sorted.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    Ok(ErrorSummary {
        n,
        median_mm: quantile_sorted(&sorted, 0.5),
        iqr_mm: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
        mean_mm: mean,
        sd_mm: sd,
        p95_mm: quantile_sorted(&sorted, 0.95),
        rmse_mm: rmse,
    })
}

/// Median by selection; reorders `v`.
fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (left, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Two-sample permutation test on the difference in medians.
///
/// `n_sub` values are drawn without replacement from each sample, then the
/// group labels of the pooled `2·n_sub` values are shuffled `n_permutations`
/// times. The p-value counts shuffles whose |Δmedian| reaches the observed
/// one, with add-one smoothing so it is never zero.
pub fn permutation_test_medians(
    a: &[f64],
    b: &[f64],
    n_sub: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<PermutationTestResult> {
    if n_sub == 0 || n_permutations == 0 {
        return Err(Error::InvalidInput("subsample size and permutation count must be positive".into()));
    }
    let shortest = a.len().min(b.len());
    if shortest < n_sub {
        return Err(Error::InsufficientData { needed: n_sub, got: shortest });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sample values must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pooled: Vec<f64> = index::sample(&mut rng, a.len(), n_sub).iter().map(|i| a[i]).collect();
    pooled.extend(index::sample(&mut rng, b.len(), n_sub).iter().map(|i| b[i]));

    let (sa, sb) = pooled.split_at_mut(n_sub);
    let median_a = median_in_place(sa);
    let median_b = median_in_place(sb);
    let observed = median_a - median_b;
    // Guards ties that differ only by rounding.
    let bar = observed.abs() * (1.0 - 1e-12);

    let mut extreme = 0usize;
    for _ in 0..n_permutations {
        let (picked, rest) = pooled.partial_shuffle(&mut rng, n_sub);
        let stat = median_in_place(picked) - median_in_place(rest);
        if stat.abs() >= bar {
            extreme += 1;
        }
    }
    Ok(PermutationTestResult {
        delta_median_mm: observed,
        median_a_mm: median_a,
        median_b_mm: median_b,
        p_value: (extreme + 1) as f64 / (n_permutations + 1) as f64,
        n_per_group: n_sub,
        n_permutations,
        seed,
    })
}
