use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Compression};

use crate::error::{Error, Result};
use crate::DepthMap;

fn encode(path: &Path, w: usize, h: usize, color: ColorType, depth: BitDepth, palette: Option<&[u8]>, data: &[u8]) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.set_compression(Compression::Fast);
    if let Some(p) = palette {
        enc.set_palette(p.to_vec());
    }
    let mut writer = enc.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

fn decode(path: &Path, expect: (ColorType, BitDepth)) -> Result<(usize, usize, Vec<u8>)> {
    let dec = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = dec.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| Error::Png("image too large".into()))?];
    let info = reader.next_frame(&mut buf)?;
    if (info.color_type, info.bit_depth) != expect {
        return Err(Error::Png(format!(
            "{}: expected {:?}/{:?}, found {:?}/{:?}",
            path.display(),
            expect.0,
            expect.1,
            info.color_type,
            info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

fn write_u16(path: &Path, w: usize, h: usize, vals: impl Iterator<Item = u16>) -> Result<()> {
    let mut data = Vec::with_capacity(w * h * 2);
    for v in vals {
        data.extend_from_slice(&v.to_be_bytes());
    }
    encode(path, w, h, ColorType::Grayscale, BitDepth::Sixteen, None, &data)
}

fn read_u16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let (w, h, buf) = decode(path, (ColorType::Grayscale, BitDepth::Sixteen))?;
    Ok((w, h, buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

/// 16-bit grayscale, millimeters, 0 = invalid. Depths that do not fit in 16 bits
/// are stored as invalid.
pub fn write_depth_png16(path: impl AsRef<Path>, depth: &DepthMap<f64>) -> Result<()> {
    let vals = depth.data().iter().map(|&d| {
        if d.is_finite() {
            let mm = (d * 1000.0).round();
            if (1.0..=65535.0).contains(&mm) {
                mm as u16
            } else {
                0
            }
        } else {
            0
        }
    });
    write_u16(path.as_ref(), depth.width(), depth.height(), vals)
}

pub fn read_depth_png16(path: impl AsRef<Path>) -> Result<DepthMap<f64>> {
    let (w, h, vals) = read_u16(path.as_ref())?;
    let d = vals
        .into_iter()
        .map(|v| if v == 0 { f64::NAN } else { v as f64 / 1000.0 })
        .collect();
    DepthMap::new(w, h, d)
}

/// Relative inverse depth in `[0, 1]` scaled to 16 bits; invalid pixels store 0.
pub fn write_mono_png16(path: impl AsRef<Path>, mono: &DepthMap<f64>) -> Result<()> {
    let vals = mono.data().iter().map(|&v| {
        if v.is_finite() {
            (v.clamp(0.0, 1.0) * 65535.0).round() as u16
        } else {
            0
        }
    });
    write_u16(path.as_ref(), mono.width(), mono.height(), vals)
}

/// Inverse of [`write_mono_png16`]; zero reads back as an invalid (sky) pixel.
pub fn read_mono_png16(path: impl AsRef<Path>) -> Result<DepthMap<f64>> {
    let (w, h, vals) = read_u16(path.as_ref())?;
    let d = vals
        .into_iter()
        .map(|v| if v == 0 { f64::NAN } else { v as f64 / 65535.0 })
        .collect();
    DepthMap::new(w, h, d)
}

/// 8-bit grayscale mask, 255 = keep.
pub fn write_mask_png8(path: impl AsRef<Path>, width: usize, height: usize, keep: &[bool]) -> Result<()> {
    if keep.len() != width * height {
        return Err(Error::InvalidInput("mask size mismatch".into()));
    }
    let data: Vec<u8> = keep.iter().map(|&k| if k { 255 } else { 0 }).collect();
    encode(path.as_ref(), width, height, ColorType::Grayscale, BitDepth::Eight, None, &data)
}

pub fn read_mask_png8(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let (w, h, buf) = decode(path.as_ref(), (ColorType::Grayscale, BitDepth::Eight))?;
    Ok((w, h, buf.into_iter().map(|v| v >= 128).collect()))
}

/// Palette-indexed 8-bit PNG; `palette` holds RGB triplets.
pub fn write_palette_png8(path: impl AsRef<Path>, width: usize, height: usize, indices: &[u8], palette: &[[u8; 3]]) -> Result<()> {
    if indices.len() != width * height {
        return Err(Error::InvalidInput("index image size mismatch".into()));
    }
    if indices.iter().any(|&i| i as usize >= palette.len()) {
        return Err(Error::InvalidInput("palette index out of range".into()));
    }
    let flat: Vec<u8> = palette.iter().flatten().copied().collect();
    encode(path.as_ref(), width, height, ColorType::Indexed, BitDepth::Eight, Some(&flat), indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_png_round_trip_in_millimeters() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        let d = DepthMap::new(3, 2, vec![1.0, f64::NAN, 2.3456, 0.0004, 70.0, 65.535]).unwrap();
        write_depth_png16(&p, &d).unwrap();
        let back = read_depth_png16(&p).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.at_index(0), Some(1.0));
        assert_eq!(back.at_index(1), None);
        assert_eq!(back.at_index(2), Some(2.346));
        assert_eq!(back.at_index(3), None);
        assert_eq!(back.at_index(4), None);
        assert_eq!(back.at_index(5), Some(65.535));
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let keep = vec![true, false, false, true];
        write_mask_png8(&p, 2, 2, &keep).unwrap();
        assert_eq!(read_mask_png8(&p).unwrap(), (2, 2, keep));
        assert!(read_depth_png16(&p).is_err());
        write_palette_png8(dir.path().join("q.png"), 2, 1, &[0, 1], &[[0, 0, 0], [255, 0, 0]]).unwrap();
    }
}
