use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::{PointCloud, Real};

/// Rigid motion `p ↦ R·p + t`. Camera poses use the camera-to-world convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T> {
    rotation: Mat3<T>,
    translation: Vec3<T>,
}

/// Camera-to-world pose.
pub type Pose<T> = RigidTransform<T>;

impl<T: Real> RigidTransform<T> {
    /// Rejects matrices that are not proper rotations within tolerance.
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Result<Self> {
        if !rotation.is_rotation() {
            return Err(Error::invalid("rotation is not orthonormal with det +1"));
        }
        if !translation.is_finite() {
            return Err(Error::invalid("translation is not finite"));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Builds a transform after projecting `rotation` to the nearest rotation.
    pub fn new_orthonormalized(rotation: Mat3<T>, translation: Vec3<T>) -> Self {
        RigidTransform {
            rotation: rotation.orthonormalized(),
            translation,
        }
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3<T>) -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    pub fn from_axis_angle(axis: &Vec3<T>, angle: T, translation: Vec3<T>) -> Self {
        RigidTransform {
            rotation: Mat3::from_axis_angle(axis, angle),
            translation,
        }
    }

    #[inline]
    pub fn rotation(&self) -> &Mat3<T> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vec3<T> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(v)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -rt.mul_vec(&self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        RigidTransform {
            rotation: self.rotation.mul_mat(&other.rotation).orthonormalized(),
            translation: self.rotation.mul_vec(&other.translation) + self.translation,
        }
    }

    /// Rotation angle (radians) and translation norm of `self⁻¹ ∘ other`.
    pub fn difference(&self, other: &Self) -> (T, T) {
        let rel_r = self.rotation.transpose().mul_mat(&other.rotation);
        (
            rel_r.rotation_angle(),
            (self.translation - other.translation).norm(),
        )
    }

    pub fn cast<U: Real>(&self) -> RigidTransform<U> {
        let mut m = [[U::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = U::lit(self.rotation.m[i][j].to_f64_lossy());
            }
        }
        RigidTransform::new_orthonormalized(Mat3::from_rows(m), self.translation.cast())
    }
}

/// Applies `p ↦ R·p + t` to every point, preserving order and colors.
pub fn apply_transform<T: Real>(cloud: &PointCloud<T>, t: &RigidTransform<T>) -> PointCloud<T> {
    cloud.map_points(|p| t.apply(p))
}

/// JSON form: 3×3 row-major rotation and translation in meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformJson {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl<T: Real> From<&RigidTransform<T>> for TransformJson {
    fn from(t: &RigidTransform<T>) -> Self {
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[3 * i + j] = t.rotation.m[i][j].to_f64_lossy();
            }
        }
        TransformJson {
            rotation,
            translation: [
                t.translation.x.to_f64_lossy(),
                t.translation.y.to_f64_lossy(),
                t.translation.z.to_f64_lossy(),
            ],
        }
    }
}

impl<T: Real> TryFrom<TransformJson> for RigidTransform<T> {
    type Error = Error;
    fn try_from(j: TransformJson) -> Result<Self> {
        let r = j.rotation;
        let m = [
            [T::lit(r[0]), T::lit(r[1]), T::lit(r[2])],
            [T::lit(r[3]), T::lit(r[4]), T::lit(r[5])],
            [T::lit(r[6]), T::lit(r[7]), T::lit(r[8])],
        ];
        let t = Vec3::new(
            T::lit(j.translation[0]),
            T::lit(j.translation[1]),
            T::lit(j.translation[2]),
        );
        RigidTransform::new(Mat3::from_rows(m), t)
    }
}

impl<T: Real> Serialize for RigidTransform<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransformJson::from(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for RigidTransform<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TransformJson::deserialize(d)?;
        RigidTransform::try_from(j).map_err(serde::de::Error::custom)
    }
}
