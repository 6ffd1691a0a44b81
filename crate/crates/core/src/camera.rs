//! Pinhole camera model and metric depth maps.
//!
//! Convention: right-handed camera frame, +Z along the optical axis, +X right and
//! +Y down in the image. Pixel `(u, v)` has its center at integer coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::transform::Pose;
use crate::{PointCloud, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        let intr = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let w = T::from_usize_lossy(self.width);
        let h = T::from_usize_lossy(self.height);
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be non-zero"));
        }
        if !(self.cx >= T::zero() && self.cx < w && self.cy >= T::zero() && self.cy < h) {
            return Err(Error::invalid("principal point outside the image"));
        }
        Ok(())
    }

    /// Ray direction through pixel `(u, v)` scaled so its Z component is 1.
    #[inline]
    pub fn ray(&self, u: T, v: T) -> Vec3<T> {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one())
    }

    /// Projects a camera-frame point. Returns `(u, v, depth)` or `None` behind the camera.
    #[inline]
    pub fn project_camera(&self, p: &Vec3<T>) -> Option<(T, T, T)> {
        if p.z <= T::zero() {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy, p.z))
    }

    /// Projects a world point through a camera-to-world pose.
    pub fn project(&self, pose: &Pose<T>, world: &Vec3<T>) -> Option<(T, T, T)> {
        self.project_camera(&pose.inverse().apply(world))
    }
}

/// Row-major metric depth image. Non-finite entries mark invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    width: usize,
    height: usize,
    depth: Vec<T>,
}

impl<T: Real> DepthMap<T> {
    pub fn new(width: usize, height: usize, depth: Vec<T>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::invalid(format!(
                "depth buffer has {} entries, expected {}x{}",
                depth.len(),
                width,
                height
            )));
        }
        if let Some(i) = depth.iter().position(|d| d.is_finite() && *d <= T::zero()) {
            return Err(Error::invalid(format!("pixel {i} has non-positive finite depth")));
        }
        Ok(DepthMap {
            width,
            height,
            depth,
        })
    }

    /// All pixels invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            depth: vec![T::nan(); width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.depth
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<T> {
        let d = self.depth[v * self.width + u];
        d.is_finite().then_some(d)
    }

    #[inline]
    pub fn at_index(&self, i: usize) -> Option<T> {
        let d = self.depth[i];
        d.is_finite().then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }

    pub fn same_size<U>(&self, other: &DepthMap<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_intrinsics(&self, intr: &CameraIntrinsics<T>) -> Result<()> {
        if intr.width != self.width || intr.height != self.height {
            return Err(Error::invalid(format!(
                "intrinsics are {}x{} but depth map is {}x{}",
                intr.width, intr.height, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Back-projects pixel `(u, v)` at depth `d` into the world frame.
#[inline]
pub fn unproject_pixel<T: Real>(
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    u: usize,
    v: usize,
    d: T,
) -> Vec3<T> {
    let cam = intr.ray(T::from_usize_lossy(u), T::from_usize_lossy(v)) * d;
    pose.apply(&cam)
}

/// One world point per valid pixel, in row-major scan order.
pub fn unproject<T: Real>(
    depth: &DepthMap<T>,
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
) -> Result<PointCloud<T>> {
    Ok(unproject_indexed(depth, intr, pose, |_| true)?.0)
}

/// Like [`unproject`], restricted to pixels accepted by `keep`, also returning the
/// flat pixel index of every produced point.
pub fn unproject_indexed<T: Real>(
    depth: &DepthMap<T>,
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    keep: impl Fn(usize) -> bool,
) -> Result<(PointCloud<T>, Vec<usize>)> {
    intr.validate()?;
    depth.check_intrinsics(intr)?;
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v * depth.width + u;
            if let Some(d) = depth.at_index(i) {
                if keep(i) {
                    points.push(unproject_pixel(intr, pose, u, v, d));
                    pixels.push(i);
                }
            }
        }
    }
    Ok((PointCloud::new(points)?, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat3;
    use crate::transform::RigidTransform;

    fn intr() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 2.0, 2.0, 4, 4).unwrap()
    }

    #[test]
    fn principal_point_ray() {
        let mut d = vec![f64::NAN; 16];
        d[2 * 4 + 2] = 2.0;
        let dm = DepthMap::new(4, 4, d).unwrap();
        let c = unproject(&dm, &intr(), &RigidTransform::identity()).unwrap();
        assert_eq!(c.points(), &[Vec3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn unit_tangent_pixel() {
        let k = CameraIntrinsics::new(1.0, 1.0, 1.0, 1.0, 4, 4).unwrap();
        let p = unproject_pixel(&k, &RigidTransform::identity(), 2, 1, 1.0);
        assert_eq!(p, Vec3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn counts_valid_pixels() {
        let mut d = vec![1.5; 16];
        d[0] = f64::NAN;
        d[5] = f64::INFINITY;
        d[15] = f64::NAN;
        let dm = DepthMap::new(4, 4, d).unwrap();
        let c = unproject(&dm, &intr(), &RigidTransform::identity()).unwrap();
        assert_eq!(c.len(), 13);
    }

    #[test]
    fn rejects_dimension_mismatch_and_bad_intrinsics() {
        let dm = DepthMap::new(3, 3, vec![1.0; 9]).unwrap();
        assert!(unproject(&dm, &intr(), &RigidTransform::identity()).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4).is_err());
        assert!(DepthMap::new(2, 2, vec![1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn reprojection_returns_pixel() {
        let k = CameraIntrinsics::new(500.0, 520.0, 31.5, 23.0, 64, 48).unwrap();
        let pose = RigidTransform::new(
            Mat3::from_axis_angle(&Vec3::new(0.2, 1.0, 0.1), 0.4),
            Vec3::new(1.0, -2.0, 0.5),
        )
        .unwrap();
        let depth: Vec<f64> = (0..64 * 48).map(|i| 1.0 + (i % 17) as f64 * 0.13).collect();
        let dm = DepthMap::new(64, 48, depth).unwrap();
        let (cloud, px) = unproject_indexed(&dm, &k, &pose, |_| true).unwrap();
        for (p, &i) in cloud.points().iter().zip(&px) {
            let (u, v, z) = k.project(&pose, p).unwrap();
            assert!((u - (i % 64) as f64).abs() < 1e-6);
            assert!((v - (i / 64) as f64).abs() < 1e-6);
            assert!((z - dm.at_index(i).unwrap()).abs() < 1e-9);
        }
    }
}
