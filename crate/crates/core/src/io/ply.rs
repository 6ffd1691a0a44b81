use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::{PointCloud, Real};

/// Vertices (with optional colors) and any faces found in a PLY file.
#[derive(Debug, Clone)]
pub struct PlyData {
    pub cloud: PointCloud<f64>,
    pub faces: Vec<Vec<u32>>,
}

/// Writes binary little-endian PLY: `x y z` as float32, optional `red green blue` as uint8.
pub fn write_ply<T: Real>(path: impl AsRef<Path>, cloud: &PointCloud<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + cloud.len() * 15);
    write_ply_to(&mut buf, cloud)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_ply_to<T: Real, W: Write>(w: &mut W, cloud: &PointCloud<T>) -> Result<()> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    );
    if cloud.colors().is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    let stride = if cloud.colors().is_some() { 15 } else { 12 };
    let mut body = Vec::with_capacity(cloud.len() * stride);
    for (i, p) in cloud.points().iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            body.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
        if let Some(c) = cloud.colors() {
            for ch in c[i] {
                body.push((ch.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    w.write_all(&body)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar, String),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Source<R> {
    r: R,
    format: Format,
    tokens: std::vec::IntoIter<String>,
}

impl<R: BufRead> Source<R> {
    fn read(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        match self.format {
            Format::Ascii => {
                let tok = loop {
                    if let Some(t) = self.tokens.next() {
                        break t;
                    }
                    let mut line = String::new();
                    if self.r.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
                        return Err("unexpected end of file".into());
                    }
                    self.tokens = line.split_whitespace().map(String::from).collect::<Vec<_>>().into_iter();
                };
                tok.parse::<f64>().map_err(|_| format!("bad number '{tok}'"))
            }
            Format::BinaryLe | Format::BinaryBe => {
                let mut b = [0u8; 8];
                let n = ty.size();
                self.r
                    .read_exact(&mut b[..n])
                    .map_err(|_| "unexpected end of file".to_string())?;
                let le = self.format == Format::BinaryLe;
                macro_rules! conv {
                    ($t:ty, $n:expr) => {{
                        let arr: [u8; $n] = b[..$n].try_into().unwrap();
                        (if le { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }) as f64
                    }};
                }
                Ok(match ty {
                    Scalar::I8 => b[0] as i8 as f64,
                    Scalar::U8 => b[0] as f64,
                    Scalar::I16 => conv!(i16, 2),
                    Scalar::U16 => conv!(u16, 2),
                    Scalar::I32 => conv!(i32, 4),
                    Scalar::U32 => conv!(u32, 4),
                    Scalar::F32 => conv!(f32, 4),
                    Scalar::F64 => conv!(f64, 8),
                })
            }
        }
    }
}

/// Reads ASCII or binary PLY. Requires `x y z` vertex properties; `red green blue`
/// are read when present. Non-finite coordinates are rejected with the offending
/// vertex index.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyData> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref())?;
    read_ply_from(BufReader::new(file), &path_str)
}

fn parse_err(path: &str, location: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        location: location.into(),
        reason: reason.into(),
    }
}

pub(crate) fn read_ply_from<R: BufRead>(mut r: R, path: &str) -> Result<PlyData> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut next_line = |r: &mut R, line: &mut String| -> Result<usize> {
        line.clear();
        lineno += 1;
        if r.read_line(line)? == 0 {
            return Err(parse_err(path, "header", "unexpected end of header"));
        }
        Ok(lineno)
    };
    next_line(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return Err(parse_err(path, "line 1", "missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let lineno = next_line(&mut r, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let loc = format!("header line {lineno}");
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    "binary_big_endian" => Format::BinaryBe,
                    other => return Err(parse_err(path, loc, format!("unknown format '{other}'"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(path, &loc, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, &loc, "property before element"))?;
                let ct = Scalar::parse(ct).ok_or_else(|| parse_err(path, &loc, "bad list count type"))?;
                let it = Scalar::parse(it).ok_or_else(|| parse_err(path, &loc, "bad list item type"))?;
                el.props.push(Property::List(ct, it, name.to_string()));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, &loc, "property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| parse_err(path, &loc, format!("bad type '{ty}'")))?;
                el.props.push(Property::Scalar(ty, name.to_string()));
            }
            _ => return Err(parse_err(path, loc, format!("unrecognized header line '{}'", line.trim()))),
        }
    }
    let format = format.ok_or_else(|| parse_err(path, "header", "missing format line"))?;
    let mut src = Source {
        r,
        format,
        tokens: Vec::new().into_iter(),
    };
    let mut points = Vec::new();
    let mut colors: Vec<[f32; 3]> = Vec::new();
    let mut faces = Vec::new();
    let mut saw_vertex = false;
    for el in &elements {
        let find = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(_, name) if name == n))
        };
        let is_vertex = el.name == "vertex";
        let (ix, iy, iz) = (find("x"), find("y"), find("z"));
        let rgb = [find("red"), find("green"), find("blue")];
        let has_rgb = rgb.iter().all(Option::is_some);
        if is_vertex {
            saw_vertex = true;
            if ix.is_none() || iy.is_none() || iz.is_none() {
                return Err(parse_err(path, "header", "vertex element lacks x/y/z"));
            }
        }
        let mut vals = vec![0.0f64; el.props.len()];
        for rec in 0..el.count {
            let loc = || format!("{} {}", el.name, rec);
            let mut list: Vec<u32> = Vec::new();
            for (k, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(ty, _) => vals[k] = src.read(*ty).map_err(|e| parse_err(path, loc(), e))?,
                    Property::List(ct, it, name) => {
                        let n = src.read(*ct).map_err(|e| parse_err(path, loc(), e))?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(parse_err(path, loc(), "bad list length"));
                        }
                        let keep = el.name == "face" && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n as usize {
                            let v = src.read(*it).map_err(|e| parse_err(path, loc(), e))?;
                            if keep {
                                if !(v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                                    return Err(parse_err(path, loc(), "bad vertex index"));
                                }
                                list.push(v as u32);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                let p = Vec3::new(vals[ix.unwrap()], vals[iy.unwrap()], vals[iz.unwrap()]);
                if !p.is_finite() {
                    return Err(parse_err(path, loc(), "non-finite coordinate"));
                }
                points.push(p);
                if has_rgb {
                    let scale = |k: usize| match &el.props[k] {
                        Property::Scalar(Scalar::F32 | Scalar::F64, _) => vals[k] as f32,
                        Property::Scalar(Scalar::U16, _) => (vals[k] / 65535.0) as f32,
                        _ => (vals[k] / 255.0) as f32,
                    };
                    colors.push([
                        scale(rgb[0].unwrap()).clamp(0.0, 1.0),
                        scale(rgb[1].unwrap()).clamp(0.0, 1.0),
                        scale(rgb[2].unwrap()).clamp(0.0, 1.0),
                    ]);
                }
            } else if !list.is_empty() {
                faces.push(list);
            }
        }
    }
    if !saw_vertex {
        return Err(parse_err(path, "header", "no vertex element"));
    }
    let cloud = if colors.is_empty() {
        PointCloud::new(points)?
    } else {
        PointCloud::with_colors(points, colors)?
    };
    Ok(PlyData { cloud, faces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_with_colors() {
        let cloud = PointCloud::with_colors(
            vec![Vec3::new(1.5, -2.25, 0.125), Vec3::new(0.0, 3.0, 1.0)],
            vec![[1.0, 0.0, 0.5], [0.2, 0.4, 0.6]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_ply_to(&mut buf, &cloud).unwrap();
        let back = read_ply_from(&buf[..], "mem").unwrap();
        assert_eq!(back.cloud.points(), cloud.points());
        let c = back.cloud.colors().unwrap();
        assert!((c[0][2] - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn ascii_with_faces() {
        let s = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let d = read_ply_from(s.as_bytes(), "mem").unwrap();
        assert_eq!(d.cloud.len(), 3);
        assert_eq!(d.faces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn nan_names_the_record() {
        let s = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 nan 0\n0 1 0\n";
        match read_ply_from(s.as_bytes(), "mem") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "vertex 1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let cloud = PointCloud::new(vec![Vec3::new(1.0f64, 2.0, 3.0); 4]).unwrap();
        let mut buf = Vec::new();
        write_ply_to(&mut buf, &cloud).unwrap();
        buf.truncate(buf.len() - 5);
        assert!(read_ply_from(&buf[..], "mem").is_err());
    }
}
