//! Geometric similarity between point clouds and aggregate error statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::voxel::voxelize;
use crate::{PointCloud, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeomMetrics {
    /// Meters.
    pub chamfer_l2: f64,
    /// Nats.
    pub jsd: f64,
    pub n_source: usize,
    pub n_target: usize,
    pub voxel_size: f64,
}

/// Whether Chamfer terms use distances or squared distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferKind {
    #[default]
    Distance,
    Squared,
}

/// Mean nearest-neighbor distance from each point of `from` to `to`.
fn one_sided<T: Real>(from: &PointCloud<T>, to: &KdTree<T>, kind: ChamferKind) -> T {
    let mut sum = T::zero();
    for p in from.points() {
        let (_, d2) = to.nearest_squared(p);
        sum += match kind {
            ChamferKind::Distance => d2.sqrt(),
            ChamferKind::Squared => d2,
        };
    }
    sum / T::from_usize_lossy(from.len())
}

/// Symmetric Chamfer distance `½(mean_a min_b ‖a−b‖ + mean_b min_a ‖a−b‖)`.
pub fn chamfer_l2<T: Real>(a: &PointCloud<T>, b: &PointCloud<T>) -> Result<T> {
    chamfer(a, b, ChamferKind::Distance)
}

pub fn chamfer<T: Real>(a: &PointCloud<T>, b: &PointCloud<T>, kind: ChamferKind) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("chamfer distance of an empty cloud"));
    }
    let ta = KdTree::new(a);
    let tb = KdTree::new(b);
    let ab = one_sided(a, &tb, kind);
    let ba = one_sided(b, &ta, kind);
    Ok((ab + ba) * T::lit(0.5))
}

/// Jensen-Shannon divergence (nats) between the voxel-occupancy distributions of
/// two clouds on a shared grid anchored at the union bounding-box minimum.
pub fn jsd<T: Real>(a: &PointCloud<T>, b: &PointCloud<T>, voxel_size: T) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("JSD of an empty cloud"));
    }
    let (lo_a, _) = a.bounds().unwrap();
    let (lo_b, _) = b.bounds().unwrap();
    let origin = lo_a.component_min(&lo_b);
    let ga = voxelize(a, voxel_size, origin)?;
    let gb = voxelize(b, voxel_size, origin)?;
    let na = T::from_usize_lossy(a.len());
    let nb = T::from_usize_lossy(b.len());
    let half = T::lit(0.5);

    let mut keys: Vec<_> = ga.counts().keys().chain(gb.counts().keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();

    let mut total = T::zero();
    for k in &keys {
        let p = T::from_usize_lossy(ga.count(k)) / na;
        let q = T::from_usize_lossy(gb.count(k)) / nb;
        let m = (p + q) * half;
        let term = |x: T| if x > T::zero() { x * (x / m).ln() } else { T::zero() };
        total += half * (term(p) + term(q));
    }
    Ok(total.max(T::zero()))
}

/// Chamfer distance and JSD together.
pub fn geom_metrics<T: Real>(pred: &PointCloud<T>, gt: &PointCloud<T>, voxel_size: T) -> Result<GeomMetrics> {
    Ok(GeomMetrics {
        chamfer_l2: chamfer_l2(pred, gt)?.to_f64_lossy(),
        jsd: jsd(pred, gt, voxel_size)?.to_f64_lossy(),
        n_source: pred.len(),
        n_target: gt.len(),
        voxel_size: voxel_size.to_f64_lossy(),
    })
}

/// Mean / population std / 75th percentile of absolute and absolute-percentage errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae_mean: f64,
    pub mae_std: f64,
    pub mae_p75: f64,
    pub mape_mean: f64,
    pub mape_std: f64,
    pub mape_p75: f64,
    pub n: usize,
    /// Items left out of the percentage statistics because their ground truth is zero.
    pub mape_excluded: usize,
}

/// Summary of a sample: mean, population standard deviation, 75th percentile.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt(), percentile(values, 75.0))
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    percentile_sorted(&s, pct)
}

pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn error_stats(estimates: &[f64], ground_truth: &[f64]) -> Result<ErrorStats> {
    if estimates.len() != ground_truth.len() || estimates.is_empty() {
        return Err(Error::invalid(format!(
            "error statistics need equal non-empty lists ({} vs {})",
            estimates.len(),
            ground_truth.len()
        )));
    }
    if estimates.iter().chain(ground_truth).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite estimate or ground truth"));
    }
    let abs: Vec<f64> = estimates.iter().zip(ground_truth).map(|(e, g)| (e - g).abs()).collect();
    let pct: Vec<f64> = estimates
        .iter()
        .zip(ground_truth)
        .filter(|(_, g)| **g != 0.0)
        .map(|(e, g)| ((e - g) / g).abs() * 100.0)
        .collect();
    let excluded = abs.len() - pct.len();
    if pct.is_empty() {
        return Err(Error::MapeUndefined(excluded));
    }
    let (mae_mean, mae_std, mae_p75) = summarize(&abs);
    let (mape_mean, mape_std, mape_p75) = summarize(&pct);
    Ok(ErrorStats {
        mae_mean,
        mae_std,
        mae_p75,
        mape_mean,
        mape_std,
        mape_p75,
        n: abs.len(),
        mape_excluded: excluded,
    })
}
