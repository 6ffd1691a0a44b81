use arbor_core::{unproject_indexed, unproject_pixel, Cloud, Depth, Error, Vec3, Vec3d};
use serde::{Deserialize, Serialize};

use crate::bundle::FrameBundle;
use crate::kmeans::{kmeans, nearest};
use crate::mask::{SegMask, Stage, StageCounts};

#[derive(Debug, thiserror::Error)]
pub enum SegError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("empty segmentation: {counts:?}")]
    Empty { counts: StageCounts },
}

pub type SegResult<T> = std::result::Result<T, SegError>;

/// Which k-means cluster is the target tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum KeepPolicy {
    /// Centroid column closest to the principal point.
    NearestImageCenter,
    /// Centroid along-row world coordinate closest to `along` (meters).
    NearestRowPosition { along: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegConfig {
    /// Meters of metric depth kept by the range cut.
    pub max_range: f64,
    /// Relative inverse depth below which a pixel is sky.
    pub tau_sky: f64,
    /// World height at or below which a pixel is ground.
    pub z_ground: f64,
    pub k: usize,
    pub keep: KeepPolicy,
    /// Clusters whose along-row centroid lies within this distance of the
    /// selected cluster are kept too, so one tree split by k-means survives whole.
    pub merge_radius: f64,
    pub row_direction: Vec3d,
    pub seed: u64,
    /// K-means is fitted on at most this many pixels (regular stride), then
    /// every kept pixel is assigned to its nearest centroid.
    pub max_fit_pixels: usize,
}

impl Default for SegConfig {
    fn default() -> Self {
        SegConfig {
            max_range: 4.6,
            tau_sky: 0.05,
            z_ground: 0.05,
            k: 3,
            keep: KeepPolicy::NearestImageCenter,
            merge_radius: 0.6,
            row_direction: Vec3::unit_x(),
            seed: 0,
            max_fit_pixels: 20_000,
        }
    }
}

/// Keeps pixels with valid depth no farther than `max_range`.
pub fn distance_filter(depth: &Depth, max_range: f64) -> arbor_core::Result<SegMask> {
    if !(max_range > 0.0) {
        return Err(Error::InvalidInput("max_range must be positive".into()));
    }
    Ok(SegMask::from_fn(depth.width(), depth.height(), |i| match depth.at_index(i) {
        Some(d) if d <= max_range => Stage::Kept,
        _ => Stage::Far,
    }))
}

/// Removes pixels whose relative inverse depth is below `tau_sky`; pixels
/// without a mono value count as 0.
pub fn sky_mask(mono: &Depth, tau_sky: f64) -> arbor_core::Result<SegMask> {
    if !(tau_sky > 0.0 && tau_sky < 1.0) {
        return Err(Error::InvalidInput("tau_sky must lie in (0, 1)".into()));
    }
    Ok(SegMask::from_fn(mono.width(), mono.height(), |i| {
        if mono.at_index(i).unwrap_or(0.0) < tau_sky {
            Stage::Sky
        } else {
            Stage::Kept
        }
    }))
}

/// Removes pixels whose unprojected world height is at most `z_ground`.
/// Pixels without depth are left to the range cut.
pub fn ground_mask(bundle: &FrameBundle, z_ground: f64) -> arbor_core::Result<SegMask> {
    if !z_ground.is_finite() {
        return Err(Error::InvalidInput("z_ground must be finite".into()));
    }
    let w = bundle.depth.width();
    Ok(SegMask::from_fn(w, bundle.depth.height(), |i| match bundle.depth.at_index(i) {
        Some(d) if unproject_pixel(&bundle.intr, &bundle.pose, i % w, i / w, d).z <= z_ground => Stage::Ground,
        _ => Stage::Kept,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ClusterStatus {
    Applied { clusters_kept: usize, iterations: usize },
    /// Fewer candidate pixels than clusters; the mask was left unchanged.
    TooFewPixels { pixels: usize },
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub mask: SegMask,
    pub status: ClusterStatus,
    pub objective: Vec<f64>,
}

fn zscore(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
    values.iter_mut().for_each(|v| *v = (*v - mean) * scale);
}

/// Clusters the kept pixels on (column, along-row position) and keeps the
/// target cluster chosen by `cfg.keep`, plus clusters within `merge_radius`
/// of it along the row.
pub fn cluster_filter(bundle: &FrameBundle, current: &SegMask, cfg: &SegConfig) -> arbor_core::Result<ClusterOutcome> {
    if cfg.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let row = cfg
        .row_direction
        .normalized()
        .ok_or_else(|| Error::InvalidInput("row direction is zero".into()))?;
    let (cloud, pixels) = unproject_indexed(&bundle.depth, &bundle.intr, &bundle.pose, |i| current.keep(i))?;
    let mut mask = current.clone();
    for i in 0..mask.provenance().len() {
        if mask.keep(i) && bundle.depth.at_index(i).is_none() {
            mask.remove(i, Stage::Far);
        }
    }
    let n = pixels.len();
    if n < cfg.k {
        log::warn!("cluster filter skipped: {n} candidate pixels for k = {}", cfg.k);
        return Ok(ClusterOutcome {
            mask,
            status: ClusterStatus::TooFewPixels { pixels: n },
            objective: Vec::new(),
        });
    }
    let w = bundle.depth.width();
    let cols: Vec<f64> = pixels.iter().map(|&i| (i % w) as f64).collect();
    let along: Vec<f64> = cloud.points().iter().map(|p| p.dot(&row)).collect();
    let (mut fu, mut fa) = (cols.clone(), along.clone());
    zscore(&mut fu);
    zscore(&mut fa);
    let features: Vec<[f64; 2]> = fu.iter().zip(&fa).map(|(&u, &a)| [u, a]).collect();
    let sample: Vec<[f64; 2]> = if n > cfg.max_fit_pixels {
        (0..cfg.max_fit_pixels).map(|j| features[j * n / cfg.max_fit_pixels]).collect()
    } else {
        features.clone()
    };
    let km = kmeans(&sample, cfg.k, cfg.seed, 100, 1e-6);
    let assign: Vec<usize> = features.iter().map(|f| nearest(f, &km.centroids)).collect();

    let mut count = vec![0usize; cfg.k];
    let mut sum_u = vec![0.0; cfg.k];
    let mut sum_a = vec![0.0; cfg.k];
    for (j, &c) in assign.iter().enumerate() {
        count[c] += 1;
        sum_u[c] += cols[j];
        sum_a[c] += along[j];
    }
    let occupied: Vec<usize> = (0..cfg.k).filter(|&c| count[c] > 0).collect();
    let mean_u = |c: usize| sum_u[c] / count[c] as f64;
    let mean_a = |c: usize| sum_a[c] / count[c] as f64;
    let score = |c: usize| match cfg.keep {
        KeepPolicy::NearestImageCenter => (mean_u(c) - bundle.intr.cx).abs(),
        KeepPolicy::NearestRowPosition { along } => (mean_a(c) - along).abs(),
    };
    let target = *occupied
        .iter()
        .min_by(|&&a, &&b| score(a).total_cmp(&score(b)))
        .expect("at least one occupied cluster");
    let keep: Vec<bool> = (0..cfg.k)
        .map(|c| count[c] > 0 && (c == target || (mean_a(c) - mean_a(target)).abs() <= cfg.merge_radius))
        .collect();
    for (j, &c) in assign.iter().enumerate() {
        if !keep[c] {
            mask.remove(pixels[j], Stage::Cluster);
        }
    }
    Ok(ClusterOutcome {
        mask,
        status: ClusterStatus::Applied {
            clusters_kept: keep.iter().filter(|&&k| k).count(),
            iterations: km.objective.len(),
        },
        objective: km.objective,
    })
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: SegMask,
    /// World-frame foreground points in scan order of their pixels.
    pub cloud: Cloud,
    pub pixels: Vec<usize>,
    pub cluster: ClusterStatus,
}

impl Segmentation {
    pub fn counts(&self) -> StageCounts {
        self.mask.counts()
    }
}

/// Range cut, sky mask and ground cut, then cluster selection.
pub fn segment_tree(bundle: &FrameBundle, cfg: &SegConfig) -> SegResult<Segmentation> {
    let mask = distance_filter(&bundle.depth, cfg.max_range)?
        .and(&sky_mask(&bundle.mono, cfg.tau_sky)?)
        .and(&ground_mask(bundle, cfg.z_ground)?);
    let clustered = cluster_filter(bundle, &mask, cfg)?;
    let mask = clustered.mask;
    if mask.kept_count() == 0 {
        return Err(SegError::Empty { counts: mask.counts() });
    }
    let (cloud, pixels) = unproject_indexed(&bundle.depth, &bundle.intr, &bundle.pose, |i| mask.keep(i))?;
    Ok(Segmentation {
        mask,
        cloud,
        pixels,
        cluster: clustered.status,
    })
}
