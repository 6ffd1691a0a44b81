//! Generalized-cylinder sweep of a skeleton chain into triangles.

use arbor_core::Vec3d;

pub const RING_SIDES: usize = 12;

/// Triangles produced for a chain of `nodes` rings: two per quad side plus
/// a fan cap at each end.
pub const fn chain_triangle_count(nodes: usize) -> usize {
    2 * RING_SIDES * (nodes - 1) + 2 * (RING_SIDES - 2)
}

/// Ring vertices sit at `radius * ring_radius_scale()`, which gives the
/// polygonal tube the same mean distance from its axis as the round tube of
/// that radius.
pub fn ring_radius_scale() -> f64 {
    let half = std::f64::consts::PI / RING_SIDES as f64;
    let t = half.tan();
    let mean_over_side = (t * (1.0 + t * t).sqrt() + t.asinh()) / (2.0 * t);
    1.0 / (half.cos() * mean_over_side)
}

/// Appends a closed tube through `positions` with per-node `radii`. Ring frames
/// are parallel-transported so consecutive rings do not twist.
pub fn sweep_chain(positions: &[Vec3d], radii: &[f64], vertices: &mut Vec<Vec3d>, triangles: &mut Vec<[u32; 3]>) {
    let m = positions.len();
    assert!(m >= 2 && radii.len() == m);
    let tangent = |i: usize| {
        let (a, b) = match i {
            0 => (positions[0], positions[1]),
            i if i == m - 1 => (positions[m - 2], positions[m - 1]),
            i => (positions[i - 1], positions[i + 1]),
        };
        (b - a).normalized().expect("coincident skeleton nodes")
    };
    let base = vertices.len() as u32;
    let scale = ring_radius_scale();
    let mut normal = tangent(0).any_orthogonal();
    for i in 0..m {
        let t = tangent(i);
        normal = (normal - t * normal.dot(&t)).normalized().unwrap_or_else(|| t.any_orthogonal());
        let binormal = t.cross(&normal);
        for k in 0..RING_SIDES {
            let theta = std::f64::consts::TAU * k as f64 / RING_SIDES as f64;
            let dir = normal * theta.cos() + binormal * theta.sin();
            vertices.push(positions[i] + dir * (radii[i] * scale));
        }
    }
    let s = RING_SIDES as u32;
    for i in 0..(m as u32 - 1) {
        let r0 = base + i * s;
        let r1 = r0 + s;
        for k in 0..s {
            let k1 = (k + 1) % s;
            triangles.push([r0 + k, r0 + k1, r1 + k1]);
            triangles.push([r0 + k, r1 + k1, r1 + k]);
        }
    }
    let last = base + (m as u32 - 1) * s;
    for k in 1..s - 1 {
        triangles.push([base, base + k + 1, base + k]);
        triangles.push([last, last + k, last + k + 1]);
    }
}
