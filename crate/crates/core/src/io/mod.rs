//! On-disk formats: binary PLY clouds, OBJ meshes, 16-bit depth PNGs, mask PNGs
//! and JSON sidecars.

mod image;
mod obj;
mod ply;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use image::{
    read_depth_png16, read_mask_png8, read_mono_png16, write_depth_png16, write_mask_png8, write_mono_png16,
    write_palette_png8,
};
pub use obj::{read_obj, write_obj, write_obj_to};
pub use ply::{read_ply, write_ply, write_ply_to, PlyData};

use crate::error::Result;

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let s = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}
