//! On-disk frame bundles: `frame_%04d.{depth,mono}.png`, `frame_%04d.pose.json`
//! and a shared `intrinsics.json`.

use std::path::{Path, PathBuf};

use arbor_core::io::{write_depth_png16, write_json, write_mono_png16};
use arbor_core::{Depth, Intrinsics, Pose, Result};

pub const INTRINSICS_FILE: &str = "intrinsics.json";

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFiles {
    pub depth: PathBuf,
    pub mono: PathBuf,
    pub pose: PathBuf,
}

impl FrameFiles {
    pub fn new(dir: &Path, index: usize) -> Self {
        let stem = format!("frame_{index:04}");
        FrameFiles {
            depth: dir.join(format!("{stem}.depth.png")),
            mono: dir.join(format!("{stem}.mono.png")),
            pose: dir.join(format!("{stem}.pose.json")),
        }
    }
}

/// Writes the intrinsics and every `(depth, mono, pose)` frame into `dir`.
pub fn write_frame_bundle(dir: impl AsRef<Path>, intr: &Intrinsics, frames: &[(Depth, Depth, Pose<f64>)]) -> Result<Vec<FrameFiles>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_json(dir.join(INTRINSICS_FILE), intr)?;
    frames
        .iter()
        .enumerate()
        .map(|(i, (depth, mono, pose))| {
            let files = FrameFiles::new(dir, i);
            write_depth_png16(&files.depth, depth)?;
            write_mono_png16(&files.mono, mono)?;
            write_json(&files.pose, pose)?;
            Ok(files)
        })
        .collect()
}
