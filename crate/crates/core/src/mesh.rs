use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::Real;

/// Indexed triangle mesh in meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[u32; 3]>,
}

impl<T: Real> TriMesh<T> {
    /// Rejects out-of-range indices, non-finite vertices and zero-area triangles.
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        let mesh = TriMesh { vertices, triangles };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(Error::invalid(format!("triangle {t} references a missing vertex")));
            }
            if !(mesh.triangle_area(t) > T::zero()) {
                return Err(Error::invalid(format!("triangle {t} has zero area")));
            }
        }
        Ok(mesh)
    }

    pub fn empty() -> Self {
        TriMesh {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    #[inline]
    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).norm() * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Appends another mesh, re-indexing its triangles.
    pub fn append(&mut self, other: &TriMesh<T>) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    /// Maps vertices; the result is re-validated.
    pub fn map_vertices(&self, f: impl Fn(&Vec3<T>) -> Vec3<T>) -> Result<Self> {
        TriMesh::new(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    pub fn bounds(&self) -> Option<(Vec3<T>, Vec3<T>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (lo.component_min(p), hi.component_max(p))
        }))
    }
}

/// Distance from `p` to triangle `abc`.
pub fn point_triangle_distance<T: Real>(p: &Vec3<T>, a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> T {
    // Ericson, closest point on triangle
    let ab = *b - *a;
    let ac = *c - *a;
    let ap = *p - *a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return ap.norm();
    }
    let bp = *p - *b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= T::zero() && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return (*p - (*a + ab * v)).norm();
    }
    let cp = *p - *c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= T::zero() && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return (*p - (*a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (*p - (*b + (*c - *b) * w)).norm();
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (*p - (*a + ab * v + ac * w)).norm()
}
