//! Height-ratio scale retrieval for reconstructions with unknown metric scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::{PointCloud, Real, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub s: f64,
    /// Reference (sensor) height, meters.
    pub h_ref: f64,
    /// Reconstruction height, reconstruction units.
    pub h_rec: f64,
}

/// `s = h_ref / h_rec`.
pub fn scale_factor(h_ref: f64, h_rec: f64) -> Result<ScaleResult> {
    if !(h_ref > 0.0 && h_rec > 0.0 && h_ref.is_finite() && h_rec.is_finite()) {
        return Err(Error::invalid(format!(
            "heights must be positive and finite (h_ref={h_ref}, h_rec={h_rec})"
        )));
    }
    Ok(ScaleResult {
        s: h_ref / h_rec,
        h_ref,
        h_rec,
    })
}

/// Base centroid: mean x/y of all points at the lowest z, so ground contact stays put.
pub fn base_center<T: Real>(points: &[Vec3<T>]) -> Option<Vec3<T>> {
    if points.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let (mut sx, mut sy, mut zmin) = (T::zero(), T::zero(), T::infinity());
    for p in points {
        sx += p.x;
        sy += p.y;
        zmin = zmin.min(p.z);
    }
    Some(Vec3::new(sx / n, sy / n, zmin))
}

fn check_s<T: Real>(s: T) -> Result<()> {
    if !(s > T::zero() && s.is_finite()) {
        return Err(Error::invalid("scale factor must be positive and finite"));
    }
    Ok(())
}

/// `p ↦ center + s·(p − center)`; `center` defaults to the base centroid.
pub fn apply_scale<T: Real>(cloud: &PointCloud<T>, s: T, center: Option<Vec3<T>>) -> Result<PointCloud<T>> {
    check_s(s)?;
    if s == T::one() {
        return Ok(cloud.clone());
    }
    let Some(c) = center.or_else(|| base_center(cloud.points())) else {
        return Ok(cloud.clone());
    };
    Ok(cloud.map_points(|p| c + (*p - c) * s))
}

pub fn apply_scale_mesh<T: Real>(mesh: &TriMesh<T>, s: T, center: Option<Vec3<T>>) -> Result<TriMesh<T>> {
    check_s(s)?;
    if s == T::one() {
        return Ok(mesh.clone());
    }
    let Some(c) = center.or_else(|| base_center(mesh.vertices())) else {
        return Ok(mesh.clone());
    };
    mesh.map_vertices(|p| c + (*p - c) * s)
}
