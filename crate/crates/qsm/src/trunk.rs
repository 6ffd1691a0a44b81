use arbor_core::linalg::sym_eigen_psd;
use arbor_core::{Cloud, Mat3, SkeletonGraph, Vec3d};
use serde::{Deserialize, Serialize};

use crate::circle::fit_circle;
use crate::params::QsmParams;
use crate::{QsmError, QsmResult};

/// Percentile of axial positions taken as the trunk base.
const BASE_PERCENTILE: f64 = 0.1;
/// Slice points must lie within this many node radii of the axis.
const RADIAL_WINDOW: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrunkMeasurement {
    pub diameter: f64,
    pub rmse: f64,
    pub slice_points: usize,
    pub center: Vec3d,
    pub axis: Vec3d,
}

fn unavailable(reason: impl Into<String>) -> QsmError {
    QsmError::TraitUnavailable { reason: reason.into() }
}

/// Diameter of the trunk `measure_height` above its base, from a circle fit
/// to a thin slice taken perpendicular to the lower trunk axis.
pub fn trunk_diameter(cloud: &Cloud, skeleton: &SkeletonGraph, params: &QsmParams) -> QsmResult<TrunkMeasurement> {
    params.validate()?;
    let path = skeleton.trunk_polyline();
    if path.len() < 2 {
        return Err(unavailable("trunk path has fewer than two nodes"));
    }
    // lower trunk nodes, up to 1.5x the measurement height along the path
    let mut arc = 0.0;
    let mut lower = vec![0usize];
    for k in 1..path.len() {
        arc += path[k].distance(&path[k - 1]);
        if arc > 1.5 * params.measure_height && lower.len() >= 2 {
            break;
        }
        lower.push(k);
    }
    let centre = lower.iter().fold(Vec3d::zeros(), |s, &k| s + path[k]) / lower.len() as f64;
    let mut cov = Mat3::zeros();
    for &k in &lower {
        let d = path[k] - centre;
        cov = cov.add(&Mat3::outer(&d, &d));
    }
    let (_, vecs) = sym_eigen_psd(&cov);
    let mut axis = vecs.col(0);
    if axis.dot(&(path[*lower.last().unwrap()] - path[0])) < 0.0 {
        axis = -axis;
    }
    let mut radii: Vec<f64> = lower.iter().map(|&k| skeleton.nodes[skeleton.trunk_path[k]].radius).collect();
    radii.sort_by(|a, b| a.total_cmp(b));
    let window = RADIAL_WINDOW * radii[radii.len() / 2];

    let radial = |p: &Vec3d, s: f64| {
        let d = *p - centre;
        (d - axis * s).norm()
    };
    let mut along: Vec<f64> = cloud
        .points()
        .iter()
        .filter_map(|p| {
            let s = (*p - centre).dot(&axis);
            (radial(p, s) <= window).then_some(s)
        })
        .collect();
    if along.is_empty() {
        return Err(unavailable("no points near the trunk axis"));
    }
    along.sort_by(|a, b| a.total_cmp(b));
    let base = arbor_core::metrics::percentile_sorted(&along, BASE_PERCENTILE);
    let target = base + params.measure_height;
    if target + 0.5 * params.slice_thickness > *along.last().unwrap() {
        return Err(unavailable("trunk is shorter than the measurement height"));
    }

    let e1 = axis.any_orthogonal();
    let e2 = axis.cross(&e1);
    let q = centre + axis * target;
    let slice: Vec<[f64; 2]> = cloud
        .points()
        .iter()
        .filter_map(|p| {
            let d = *p - q;
            let s = d.dot(&axis);
            (s.abs() <= 0.5 * params.slice_thickness && (d - axis * s).norm() <= window)
                .then(|| [d.dot(&e1), d.dot(&e2)])
        })
        .collect();
    if slice.len() < 3 {
        return Err(unavailable(format!("trunk slice has {} points", slice.len())));
    }
    let fit = fit_circle(&slice).ok_or_else(|| unavailable("circle fit failed on the trunk slice"))?;
    if fit.rmse > params.circle_fit_max_rmse {
        return Err(unavailable(format!(
            "circle fit rmse {:.4} m exceeds {:.4} m",
            fit.rmse, params.circle_fit_max_rmse
        )));
    }
    Ok(TrunkMeasurement {
        diameter: 2.0 * fit.radius,
        rmse: fit.rmse,
        slice_points: slice.len(),
        center: q + e1 * fit.center[0] + e2 * fit.center[1],
        axis,
    })
}
