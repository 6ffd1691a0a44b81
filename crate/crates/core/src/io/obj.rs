use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::{Real, TriMesh};

pub fn write_obj<T: Real>(path: impl AsRef<Path>, mesh: &TriMesh<T>) -> Result<()> {
    let mut buf = Vec::new();
    write_obj_to(&mut buf, mesh)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Plain `v` / `f` records, 1-based indices, shortest round-trip float formatting.
pub fn write_obj_to<T: Real, W: Write>(w: &mut W, mesh: &TriMesh<T>) -> Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x.to_f64_lossy(), v.y.to_f64_lossy(), v.z.to_f64_lossy())?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Reads `v` and `f` records; polygons are fan-triangulated, other records ignored.
pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh<f64>> {
    let p = path.as_ref().display().to_string();
    let f = std::fs::File::open(path.as_ref())?;
    read_obj_from(BufReader::new(f), &p)
}

pub(crate) fn read_obj_from<R: BufRead>(r: R, path: &str) -> Result<TriMesh<f64>> {
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_string(),
        location: format!("line {line}"),
        reason,
    };
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let no = k + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(no, "bad vertex coordinate".into()))?;
                if c.len() != 3 {
                    return Err(err(no, "vertex needs 3 coordinates".into()));
                }
                let v = Vec3::new(c[0], c[1], c[2]);
                if !v.is_finite() {
                    return Err(err(no, format!("non-finite vertex {}", verts.len())));
                }
                verts.push(v);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in toks {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| err(no, format!("bad face index '{t}'")))?;
                    let resolved = if i > 0 { i - 1 } else { verts.len() as i64 + i };
                    if i == 0 || resolved < 0 || resolved >= verts.len() as i64 {
                        return Err(err(no, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err(no, "face needs at least 3 vertices".into()));
                }
                for j in 1..idx.len() - 1 {
                    tris.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(verts, tris).map_err(|e| Error::Parse {
        path: path.to_string(),
        location: "mesh".into(),
        reason: e.to_string(),
    })
}
