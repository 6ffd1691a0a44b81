//! Small fixed-size vector and matrix types plus a 3×3 SVD.

use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]", bound(serialize = "T: Clone + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> From<[T; 3]> for Vec3<T> {
    fn from([x, y, z]: [T; 3]) -> Self {
        Vec3 { x, y, z }
    }
}

impl<T> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    #[inline]
    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    #[inline]
    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance_squared(&self, o: &Self) -> T {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> T {
        self.distance_squared(o).sqrt()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(*self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn component_min(&self, o: &Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn component_max(&self, o: &Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthogonal(&self) -> Self {
        let a = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Self::unit_x()
        } else if self.y.abs() <= self.z.abs() {
            Self::unit_y()
        } else {
            Self::unit_z()
        };
        self.cross(&a).normalized().unwrap_or_else(Self::unit_x)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Mat3 { m }
    }

    pub fn from_cols(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Self {
        Mat3 {
            m: [[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]],
        }
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }

    pub fn zeros() -> Self {
        Mat3 {
            m: [[T::zero(); 3]; 3],
        }
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Mat3 {
            m: [[a, z, z], [z, b, z], [z, z, c]],
        }
    }

    /// Outer product `a bᵀ`.
    pub fn outer(a: &Vec3<T>, b: &Vec3<T>) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3 { m }
    }

    /// Rotation by `angle` radians about `axis` (Rodrigues).
    pub fn from_axis_angle(axis: &Vec3<T>, angle: T) -> Self {
        let k = axis.normalized().unwrap_or_else(Vec3::unit_z);
        let (s, c) = angle.sin_cos();
        let t = T::one() - c;
        Mat3 {
            m: [
                [t * k.x * k.x + c, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y],
                [t * k.x * k.y + s * k.z, t * k.y * k.y + c, t * k.y * k.z - s * k.x],
                [t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c],
            ],
        }
    }

    pub fn rotation_z(angle: T) -> Self {
        Self::from_axis_angle(&Vec3::unit_z(), angle)
    }

    #[inline]
    pub fn col(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    #[inline]
    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::from(self.m[i])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Mat3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Mat3 { m }
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }

    /// Largest absolute entry of `a - b`.
    pub fn max_abs_diff(&self, o: &Self) -> T {
        let mut d = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// True when `RᵀR = I` and `det R = +1` within the scalar's rotation tolerance.
    pub fn is_rotation(&self) -> bool {
        let tol = T::rotation_tolerance();
        self.is_finite()
            && self.transpose().mul_mat(self).max_abs_diff(&Self::identity()) <= tol
            && (self.determinant() - T::one()).abs() <= tol
    }

    /// Nearest proper rotation in the Frobenius sense (polar factor with det +1).
    pub fn orthonormalized(&self) -> Self {
        let svd = Svd3::new(self);
        let mut u = svd.u;
        if u.mul_mat(&svd.v.transpose()).determinant() < T::zero() {
            for row in u.m.iter_mut() {
                row[2] = -row[2];
            }
        }
        u.mul_mat(&svd.v.transpose())
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> T {
        let c = (self.trace() - T::one()) / T::lit(2.0);
        c.max(-T::one()).min(T::one()).acos()
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.mul_mat(&o)
    }
}

impl<T: Real> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        self.mul_vec(&v)
    }
}

/// Singular value decomposition `A = U diag(s) Vᵀ` of a 3×3 matrix, computed with
/// one-sided Jacobi rotations. Singular values are sorted descending; `U` and `V`
/// are orthogonal (either may carry a reflection).
#[derive(Debug, Clone, Copy)]
pub struct Svd3<T> {
    pub u: Mat3<T>,
    pub singular: [T; 3],
    pub v: Mat3<T>,
}

impl<T: Real> Svd3<T> {
    pub fn new(a: &Mat3<T>) -> Self {
        let mut b = [a.col(0), a.col(1), a.col(2)];
        let mut v = [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()];
        let eps = T::epsilon();
        for _sweep in 0..64 {
            let mut rotated = false;
            for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let alpha = b[i].norm_squared();
                let beta = b[j].norm_squared();
                let gamma = b[i].dot(&b[j]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (bi, bj) = (b[i], b[j]);
                b[i] = bi * c - bj * s;
                b[j] = bi * s + bj * c;
                let (vi, vj) = (v[i], v[j]);
                v[i] = vi * c - vj * s;
                v[j] = vi * s + vj * c;
            }
            if !rotated {
                break;
            }
        }
        let mut order = [0usize, 1, 2];
        let norms = [b[0].norm(), b[1].norm(), b[2].norm()];
        order.sort_by(|&p, &q| norms[q].partial_cmp(&norms[p]).unwrap_or(std::cmp::Ordering::Equal));
        let singular = [norms[order[0]], norms[order[1]], norms[order[2]]];
        let vs = [v[order[0]], v[order[1]], v[order[2]]];
        let scale = singular[0].max(T::min_positive_value());
        let tiny = scale * eps * T::lit(16.0);
        let mut us = [Vec3::zeros(); 3];
        for k in 0..3 {
            if singular[k] > tiny {
                us[k] = b[order[k]] / singular[k];
            }
        }
        // complete U for rank-deficient inputs
        if singular[0] <= tiny {
            us = [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()];
        } else if singular[1] <= tiny {
            us[1] = us[0].any_orthogonal();
            us[2] = us[0].cross(&us[1]);
        } else if singular[2] <= tiny {
            us[2] = us[0].cross(&us[1]).normalized().unwrap_or_else(|| us[0].any_orthogonal());
        }
        Svd3 {
            u: Mat3::from_cols(us[0], us[1], us[2]),
            singular,
            v: Mat3::from_cols(vs[0], vs[1], vs[2]),
        }
    }

    /// Number of singular values above `rel_tol · s_max`.
    pub fn rank(&self, rel_tol: T) -> usize {
        let cut = self.singular[0] * rel_tol;
        self.singular.iter().filter(|&&s| s > cut && s > T::zero()).count()
    }
}

/// Eigen-decomposition of a symmetric positive semi-definite matrix: eigenvalues
/// descending, eigenvectors as matching columns.
pub fn sym_eigen_psd<T: Real>(a: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let svd = Svd3::new(a);
    (svd.singular, svd.v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(s: &Svd3<f64>) -> Mat3<f64> {
        s.u.mul_mat(&Mat3::diag(s.singular[0], s.singular[1], s.singular[2]))
            .mul_mat(&s.v.transpose())
    }

    #[test]
    fn svd_reconstructs_general_matrix() {
        let a = Mat3::from_rows([[2.0, -1.0, 0.5], [0.3, 4.0, 1.0], [-2.0, 0.1, 3.0]]);
        let s = Svd3::new(&a);
        assert!(reconstruct(&s).max_abs_diff(&a) < 1e-12);
        assert!(s.singular[0] >= s.singular[1] && s.singular[1] >= s.singular[2]);
        assert!(s.u.transpose().mul_mat(&s.u).max_abs_diff(&Mat3::identity()) < 1e-12);
        assert!(s.v.transpose().mul_mat(&s.v).max_abs_diff(&Mat3::identity()) < 1e-12);
    }

    #[test]
    fn svd_handles_rank_one() {
        let a = Mat3::outer(&Vec3::new(1.0, 2.0, 3.0), &Vec3::new(-1.0, 0.5, 2.0));
        let s = Svd3::new(&a);
        assert_eq!(s.rank(1e-10), 1);
        assert!(reconstruct(&s).max_abs_diff(&a) < 1e-12);
        assert!(s.u.transpose().mul_mat(&s.u).max_abs_diff(&Mat3::identity()) < 1e-12);
    }

    #[test]
    fn orthonormalize_recovers_rotation() {
        let r = Mat3::from_axis_angle(&Vec3::new(1.0, 2.0, -0.5), 0.7);
        assert!(r.is_rotation());
        let mut noisy = r;
        noisy.m[0][1] += 1e-6;
        let fixed = noisy.orthonormalized();
        assert!(fixed.is_rotation());
        assert!(fixed.max_abs_diff(&r) < 1e-5);
        assert!((r.rotation_angle() - 0.7f64).abs() < 1e-12);
    }

    #[test]
    fn single_precision_rotation_check() {
        let r = Mat3::<f32>::from_axis_angle(&Vec3::new(0.0, 1.0, 0.0), 0.3);
        assert!(r.is_rotation());
    }
}
