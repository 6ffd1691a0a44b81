use std::path::Path;

use arbor_core::io::{read_depth_png16, read_json, read_mono_png16};
use arbor_core::{Depth, Error, Intrinsics, Pose, Result};

/// One captured frame: metric depth, monocular relative depth and camera.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub depth: Depth,
    /// Relative inverse depth; invalid pixels read as 0 (sky).
    pub mono: Depth,
    pub intr: Intrinsics,
    pub pose: Pose<f64>,
}

impl FrameBundle {
    pub fn new(depth: Depth, mono: Depth, intr: Intrinsics, pose: Pose<f64>) -> Result<Self> {
        intr.validate()?;
        depth.check_intrinsics(&intr)?;
        if !depth.same_size(&mono) {
            return Err(Error::InvalidInput("depth and mono images differ in size".into()));
        }
        Ok(FrameBundle { depth, mono, intr, pose })
    }

    pub fn len(&self) -> usize {
        self.depth.width() * self.depth.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads `intrinsics.json` and `frame_%04d.{depth.png,mono.png,pose.json}`
/// from `dir`, stopping at the first missing index.
pub fn read_frames(dir: impl AsRef<Path>) -> Result<Vec<FrameBundle>> {
    let dir = dir.as_ref();
    let intr: Intrinsics = read_json(dir.join("intrinsics.json"))?;
    let mut frames = Vec::new();
    loop {
        let stem = format!("frame_{:04}", frames.len());
        let depth_path = dir.join(format!("{stem}.depth.png"));
        if !depth_path.exists() {
            break;
        }
        let depth = read_depth_png16(&depth_path)?;
        let mono = read_mono_png16(dir.join(format!("{stem}.mono.png")))?;
        let pose: Pose<f64> = read_json(dir.join(format!("{stem}.pose.json")))?;
        frames.push(FrameBundle::new(depth, mono, intr, pose)?);
    }
    if frames.is_empty() {
        return Err(Error::InvalidInput(format!("no frames found in {}", dir.display())));
    }
    Ok(frames)
}
