use arbor_core::{Error, Intrinsics, Mat3, Pose, Result, Transform, Vec3, Vec3d};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream};

/// Stereo-head camera at 1920x1200 with a wide-angle lens.
pub fn zed_intrinsics() -> Intrinsics {
    Intrinsics::new(1069.0, 1069.0, 960.0, 600.0, 1920, 1200).expect("static intrinsics")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AimPolicy {
    /// Optical axis perpendicular to the row on every frame.
    FixedPerpendicular,
    /// Optical axis aimed at the trunk at camera height.
    TrackTrunk,
}

/// A straight pass along a planting row. Frames are centred on the point
/// abeam of `trunk_origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RowSpec {
    pub row_direction: Vec3d,
    /// Ground point of the trunk line the camera is centred on.
    pub trunk_origin: Vec3d,
    pub camera_offset: f64,
    pub camera_height: f64,
    /// Meters per second.
    pub speed: f64,
    pub fps: f64,
    pub n_frames: usize,
    pub look_at: AimPolicy,
}

/// Two miles per hour in meters per second.
pub const TWO_MPH: f64 = 0.89408;

impl Default for RowSpec {
    fn default() -> Self {
        RowSpec {
            row_direction: Vec3::unit_x(),
            trunk_origin: Vec3::zeros(),
            camera_offset: 3.5,
            camera_height: 1.8,
            speed: TWO_MPH,
            fps: 15.0,
            n_frames: 15,
            look_at: AimPolicy::FixedPerpendicular,
        }
    }
}

impl RowSpec {
    pub fn spacing(&self) -> f64 {
        self.speed / self.fps
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.speed > 0.0
            && self.fps > 0.0
            && self.camera_offset > 0.0
            && self.camera_height.is_finite()
            && self.speed.is_finite()
            && self.fps.is_finite()
            && self.camera_offset.is_finite()
            && self.trunk_origin.is_finite();
        if !ok {
            return Err(Error::InvalidInput("row spec needs positive finite speed, fps and offset".into()));
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidInput("row spec has zero frames".into()));
        }
        match self.row_direction.normalized() {
            Some(d) if d.cross(&Vec3::unit_z()).norm() > 1e-6 => Ok(()),
            _ => Err(Error::InvalidInput("row direction must be non-zero and not vertical".into())),
        }
    }
}

/// Camera-to-world poses, one per frame, spaced `speed / fps` apart.
pub fn plan_trajectory(row: &RowSpec) -> Result<Vec<Pose<f64>>> {
    row.validate()?;
    let up = Vec3::unit_z();
    let dir = row.row_direction.normalized().unwrap();
    let facing = up.cross(&dir).normalized().unwrap();
    let base = row.trunk_origin - facing * row.camera_offset + up * row.camera_height;
    let aim = row.trunk_origin + up * row.camera_height;
    let spacing = row.spacing();
    let mid = (row.n_frames - 1) as f64 / 2.0;
    (0..row.n_frames)
        .map(|i| {
            let position = base + dir * ((i as f64 - mid) * spacing);
            let rotation = match row.look_at {
                AimPolicy::FixedPerpendicular => Mat3::from_cols(dir, facing.cross(&dir), facing),
                AimPolicy::TrackTrunk => {
                    let z = (aim - position).normalized().unwrap();
                    let x = z.cross(&up).normalized().ok_or_else(|| {
                        Error::InvalidInput("track-trunk aim is vertical".into())
                    })?;
                    Mat3::from_cols(x, z.cross(&x), z)
                }
            };
            Transform::new(rotation, position)
        })
        .collect()
}

/// Number of views for one tree, uniform in `lo..=hi`.
pub fn sample_view_count(seed: u64, lo: usize, hi: usize) -> Result<usize> {
    if lo == 0 || lo > hi {
        return Err(Error::InvalidInput(format!("bad view range {lo}..{hi}")));
    }
    Ok(stream(seed, Stream::Views).random_range(lo..=hi))
}
