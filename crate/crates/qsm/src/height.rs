use arbor_core::metrics::percentile_sorted;
use arbor_core::{Cloud, Error, KdIndex, Result};

const SOR_K: usize = 8;
const SOR_STD: f64 = 2.0;

/// Statistical outlier removal: drops points whose mean distance to their
/// `k` nearest neighbours exceeds the cloud mean by more than `std_mult`
/// population standard deviations.
pub fn remove_outliers(cloud: &Cloud, k: usize, std_mult: f64) -> Cloud {
    if cloud.len() <= k {
        return cloud.clone();
    }
    let tree = KdIndex::new(cloud);
    let mean_d: Vec<f64> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.knn(p, k + 1);
            let others: Vec<f64> = nn.iter().filter(|(j, _)| *j != i).take(k).map(|&(_, d)| d).collect();
            others.iter().sum::<f64>() / others.len() as f64
        })
        .collect();
    let n = mean_d.len() as f64;
    let mu = mean_d.iter().sum::<f64>() / n;
    let sd = (mean_d.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n).sqrt();
    let limit = mu + std_mult * sd;
    cloud.select(|i, _| mean_d[i] <= limit)
}

/// Percentile span of z after outlier removal.
pub fn tree_height_percentiles(cloud: &Cloud, p_lo: f64, p_hi: f64) -> Result<f64> {
    if cloud.len() < 10 {
        return Err(Error::InvalidInput(format!("tree height needs at least 10 points, got {}", cloud.len())));
    }
    if !(0.0 <= p_lo && p_lo < p_hi && p_hi <= 100.0) {
        return Err(Error::InvalidInput("percentiles must satisfy 0 <= lo < hi <= 100".into()));
    }
    let kept = remove_outliers(cloud, SOR_K, SOR_STD);
    let mut z: Vec<f64> = kept.points().iter().map(|p| p.z).collect();
    z.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&z, p_hi) - percentile_sorted(&z, p_lo))
}

/// 1st-to-99th percentile height span.
pub fn tree_height(cloud: &Cloud) -> Result<f64> {
    tree_height_percentiles(cloud, 1.0, 99.0)
}
