//! Per-trial metric rows in the layout of the clinical results table: error
//! statistics over the full traced set, distance metrics as min–max ranges
//! over disjoint pools of traced points.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    chamfer, hausdorff, per_point_nn_error, reconstruction_accuracy, sliced_emd, summarize, surface_coverage,
    ErrorSummary, DEFAULT_COVERAGE_THRESHOLD_MM, DEFAULT_EMD_DIRECTIONS,
};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub coverage_threshold_mm: f64,
    pub emd_directions: usize,
    /// Number of disjoint pools; 1 evaluates the full traced set once.
    pub pools: usize,
    /// Seeds the pool split and the EMD directions.
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            coverage_threshold_mm: DEFAULT_COVERAGE_THRESHOLD_MM,
            emd_directions: DEFAULT_EMD_DIRECTIONS,
            pools: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Span> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(Span { min: v, max: v }),
            Some(s) => Some(Span { min: s.min.min(v), max: s.max.max(v) }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMetrics {
    pub n: usize,
    pub hausdorff_mm: f64,
    pub chamfer_mm2: f64,
    pub emd_mm: f64,
    pub coverage: f64,
    /// Absent when no reference point is covered.
    pub recon_accuracy_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: String,
    pub coverage_threshold_mm: f64,
    pub seed: u64,
    /// Per-point traced-to-reference error over all traced points.
    pub errors: ErrorSummary,
    pub pools: Vec<PoolMetrics>,
    pub hausdorff_mm: Span,
    pub chamfer_mm2: Span,
    pub emd_mm: Span,
    pub coverage: Span,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recon_accuracy_mm: Option<Span>,
}

/// Seeded random split of `0..n` into `pools` disjoint groups whose sizes
/// differ by at most one. Each group is sorted.
pub fn split_pools(n: usize, pools: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if pools == 0 {
        return Err(Error::InvalidInput("pool count must be at least 1".into()));
    }
    if n < pools {
        return Err(Error::InsufficientData { needed: pools, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if pools > 1 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut out = vec![Vec::with_capacity(n / pools + 1); pools];
    for (k, i) in order.into_iter().enumerate() {
        out[k % pools].push(i);
    }
    for pool in &mut out {
        pool.sort_unstable();
    }
    Ok(out)
}

fn pool_metrics(traced: &PointCloud, reference: &PointCloud, cfg: &EvaluationConfig) -> Result<PoolMetrics> {
    let recon = match reconstruction_accuracy(reference, traced, cfg.coverage_threshold_mm) {
        Ok(v) => Some(v),
        Err(Error::NothingCovered { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(PoolMetrics {
        n: traced.len(),
        hausdorff_mm: hausdorff(traced, reference)?.symmetric_mm,
        chamfer_mm2: chamfer(traced, reference)?.symmetric_mm2,
        emd_mm: sliced_emd(traced, reference, cfg.emd_directions, cfg.seed)?,
        coverage: surface_coverage(reference, traced, cfg.coverage_threshold_mm)?,
        recon_accuracy_mm: recon,
    })
}

/// Evaluates traced overlay points against the reference surface trace.
pub fn evaluate_trial(
    trial: &str,
    traced: &PointCloud,
    reference: &PointCloud,
    cfg: &EvaluationConfig,
) -> Result<TrialReport> {
    let errors = summarize(&per_point_nn_error(traced, reference)?)?;
    let pools = split_pools(traced.len(), cfg.pools, cfg.seed)?
        .iter()
        .map(|idx| pool_metrics(&traced.select(idx), reference, cfg))
        .collect::<Result<Vec<_>>>()?;
    let span = |f: fn(&PoolMetrics) -> f64| Span::of(pools.iter().map(f)).expect("at least one pool");
    let recon_accuracy_mm = if pools.iter().all(|p| p.recon_accuracy_mm.is_some()) {
        Span::of(pools.iter().filter_map(|p| p.recon_accuracy_mm))
    } else {
        None
    };
    Ok(TrialReport {
        trial: trial.to_string(),
        coverage_threshold_mm: cfg.coverage_threshold_mm,
        seed: cfg.seed,
        errors,
        hausdorff_mm: span(|p| p.hausdorff_mm),
        chamfer_mm2: span(|p| p.chamfer_mm2),
        emd_mm: span(|p| p.emd_mm),
        coverage: span(|p| p.coverage),
        recon_accuracy_mm,
        pools,
    })
}

/// Column names of the results table.
pub const TABLE_COLUMNS: [&str; 10] =
    ["Trial", "N", "Median", "IQR", "Mean±SD", "Hausdorff", "Chamfer", "EMD", "Coverage≤5mm", "Recon. acc."];

fn fmt_span(s: &Span, scale: f64, suffix: &str) -> String {
    let (lo, hi) = (format!("{:.2}", s.min * scale), format!("{:.2}", s.max * scale));
    if lo == hi {
        format!("{lo}{suffix}")
    } else {
        format!("{lo}–{hi}{suffix}")
    }
}

/// Renders reports as CSV, one row per trial. Distance metrics show the
/// pool range `min–max` (a single value when it collapses).
pub fn table_csv(reports: &[TrialReport]) -> Result<String> {
    let mut columns = TABLE_COLUMNS.map(String::from);
    if let Some(t) = reports.first().map(|r| r.coverage_threshold_mm) {
        if reports.iter().any(|r| r.coverage_threshold_mm != t) {
            return Err(Error::InvalidInput("all rows must share one coverage threshold".into()));
        }
        columns[8] = format!("Coverage≤{t}mm");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidInput(format!("cannot write CSV: {e}"));
    w.write_record(&columns).map_err(io)?;
    for r in reports {
        let e = &r.errors;
        w.write_record([
            r.trial.clone(),
            e.n.to_string(),
            format!("{:.2}", e.median_mm),
            format!("{:.2}", e.iqr_mm),
            format!("{:.2}±{:.2}", e.mean_mm, e.sd_mm),
            fmt_span(&r.hausdorff_mm, 1.0, ""),
            fmt_span(&r.chamfer_mm2, 1.0, ""),
            fmt_span(&r.emd_mm, 1.0, ""),
            fmt_span(&r.coverage, 100.0, "%"),
            r.recon_accuracy_mm.as_ref().map_or_else(|| "n/a".to_string(), |s| fmt_span(s, 1.0, "")),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("cannot write CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;
    use nalgebra::Vector3;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n).map(|_| Vector3::from_fn(|_, _| rng.random_range(-30.0..30.0))).collect(),
            FrameId::World,
        )
        .unwrap()
    }

    #[test]
    fn pools_partition_indices() {
        let pools = split_pools(10, 3, 4).unwrap();
        let mut all: Vec<usize> = pools.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(pools.iter().all(|p| p.len() == 3 || p.len() == 4));
        assert_eq!(pools, split_pools(10, 3, 4).unwrap());
        assert_ne!(pools, split_pools(10, 3, 5).unwrap());
        assert!(split_pools(2, 3, 0).is_err());
        assert!(split_pools(5, 0, 0).is_err());
    }

    #[test]
    fn identical_clouds_give_zero_row() {
        let a = random_cloud(90, 1);
        let r = evaluate_trial("same", &a, &a, &EvaluationConfig::default()).unwrap();
        assert_eq!(r.errors.median_mm, 0.0);
        assert_eq!(r.hausdorff_mm, Span { min: 0.0, max: 0.0 });
        assert_eq!(r.coverage, Span { min: 1.0, max: 1.0 });
        let csv = table_csv(&[r]).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "same,90,0.00,0.00,0.00±0.00,0.00,0.00,0.00,100.00%,0.00");
    }

    #[test]
    fn three_pools_report_ranges() {
        let traced = random_cloud(300, 2);
        let reference = random_cloud(400, 3);
        let cfg = EvaluationConfig { pools: 3, seed: 11, ..Default::default() };
        let r = evaluate_trial("t", &traced, &reference, &cfg).unwrap();
        assert_eq!(r.pools.len(), 3);
        assert_eq!(r.pools.iter().map(|p| p.n).sum::<usize>(), 300);
        assert!(r.chamfer_mm2.min < r.chamfer_mm2.max);
        let csv = table_csv(&[r]).unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(header, "Trial,N,Median,IQR,Mean±SD,Hausdorff,Chamfer,EMD,Coverage≤5mm,Recon. acc.");
        assert!(csv.lines().nth(1).unwrap().split(',').nth(6).unwrap().contains('–'));
    }
}
