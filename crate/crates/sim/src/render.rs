//! Z-buffer rasterization of triangle meshes into metric depth maps.

use arbor_core::{Depth, Error, Intrinsics, Mesh, Pose, Result, Vec3, Vec3d};
use serde::{Deserialize, Serialize};

pub const LABEL_BACKGROUND: u16 = 0;
pub const LABEL_GROUND: u16 = 1;
/// Label of `Scene::meshes[0]`; later meshes count up from here.
pub const LABEL_FIRST_MESH: u16 = 2;

const NEAR: f64 = 0.01;

/// Horizontal square at height `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub z: f64,
    pub center: Vec3d,
    pub half_extent: f64,
}

impl Default for GroundPlane {
    fn default() -> Self {
        GroundPlane {
            z: 0.0,
            center: Vec3::zeros(),
            half_extent: 60.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Scene<'a> {
    pub meshes: Vec<&'a Mesh>,
    pub ground: Option<GroundPlane>,
}

/// Depth plus the label of the surface seen at each pixel.
#[derive(Debug, Clone)]
pub struct Render {
    pub depth: Depth,
    pub labels: Vec<u16>,
}

struct ZBuffer {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    labels: Vec<u16>,
}

impl ZBuffer {
    fn raster(&mut self, a: [f64; 3], b: [f64; 3], c: [f64; 3], label: u16) {
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if !(area.abs() > 1e-12) {
            return;
        }
        let wmax = (self.width - 1) as f64;
        let hmax = (self.height - 1) as f64;
        let x0 = a[0].min(b[0]).min(c[0]).ceil().max(0.0);
        let x1 = a[0].max(b[0]).max(c[0]).floor().min(wmax);
        let y0 = a[1].min(b[1]).min(c[1]).ceil().max(0.0);
        let y1 = a[1].max(b[1]).max(c[1]).floor().min(hmax);
        if x0 > x1 || y0 > y1 {
            return;
        }
        let sign = area.signum();
        let flat = a[2] == b[2] && b[2] == c[2];
        for y in y0 as usize..=y1 as usize {
            let py = y as f64;
            for x in x0 as usize..=x1 as usize {
                let px = x as f64;
                let w0 = ((c[0] - b[0]) * (py - b[1]) - (c[1] - b[1]) * (px - b[0])) * sign;
                let w1 = ((a[0] - c[0]) * (py - c[1]) - (a[1] - c[1]) * (px - c[0])) * sign;
                let w2 = ((b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])) * sign;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                // 1/z is affine in screen space
                let inv_z = if flat {
                    a[2]
                } else {
                    (w0 * a[2] + w1 * b[2] + w2 * c[2]) / (area * sign)
                };
                if !(inv_z > 0.0) {
                    continue;
                }
                let z = 1.0 / inv_z;
                let i = y * self.width + x;
                if z < self.depth[i] {
                    self.depth[i] = z;
                    self.labels[i] = label;
                }
            }
        }
    }

    fn draw(&mut self, vertices: &[Vec3d], triangles: &[[u32; 3]], intr: &Intrinsics, pose: &Pose<f64>, label: u16) {
        let to_cam = pose.inverse();
        let cam: Vec<Vec3d> = vertices.iter().map(|v| to_cam.apply(v)).collect();
        let project = |p: &Vec3d| [intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy, 1.0 / p.z];
        let mut poly: Vec<Vec3d> = Vec::with_capacity(4);
        for tri in triangles {
            let corners = tri.map(|i| cam[i as usize]);
            if corners.iter().all(|p| p.z < NEAR) {
                continue;
            }
            poly.clear();
            for k in 0..3 {
                let (p, q) = (corners[k], corners[(k + 1) % 3]);
                if p.z >= NEAR {
                    poly.push(p);
                }
                if (p.z >= NEAR) != (q.z >= NEAR) {
                    let t = (NEAR - p.z) / (q.z - p.z);
                    let mut x = p + (q - p) * t;
                    x.z = NEAR;
                    poly.push(x);
                }
            }
            let s = project(&poly[0]);
            for k in 1..poly.len() - 1 {
                self.raster(s, project(&poly[k]), project(&poly[k + 1]), label);
            }
        }
    }
}

/// Renders every mesh of the scene, then the ground plane. On equal depth the
/// earlier surface wins.
pub fn render_scene(scene: &Scene, intr: &Intrinsics, pose: &Pose<f64>) -> Result<Render> {
    intr.validate()?;
    let n = intr.width * intr.height;
    let mut zb = ZBuffer {
        width: intr.width,
        height: intr.height,
        depth: vec![f64::INFINITY; n],
        labels: vec![LABEL_BACKGROUND; n],
    };
    for (k, mesh) in scene.meshes.iter().enumerate() {
        let label = LABEL_FIRST_MESH
            .checked_add(k as u16)
            .filter(|_| k < (u16::MAX - LABEL_FIRST_MESH) as usize)
            .ok_or_else(|| Error::InvalidInput("too many meshes in scene".into()))?;
        zb.draw(mesh.vertices(), mesh.triangles(), intr, pose, label);
    }
    if let Some(g) = &scene.ground {
        let (c, e) = (g.center, g.half_extent);
        let quad = [
            Vec3::new(c.x - e, c.y - e, g.z),
            Vec3::new(c.x + e, c.y - e, g.z),
            Vec3::new(c.x + e, c.y + e, g.z),
            Vec3::new(c.x - e, c.y + e, g.z),
        ];
        zb.draw(&quad, &[[0, 1, 2], [0, 2, 3]], intr, pose, LABEL_GROUND);
    }
    let depth = zb.depth.into_iter().map(|d| if d.is_finite() { d } else { f64::NAN }).collect();
    Ok(Render {
        depth: Depth::new(intr.width, intr.height, depth)?,
        labels: zb.labels,
    })
}

/// Depth of a single mesh with no ground; uncovered pixels are invalid.
pub fn render_depth(mesh: &Mesh, intr: &Intrinsics, pose: &Pose<f64>) -> Result<Depth> {
    if mesh.is_empty() {
        return Err(Error::InvalidInput("cannot render an empty mesh".into()));
    }
    let scene = Scene {
        meshes: vec![mesh],
        ground: None,
    };
    Ok(render_scene(&scene, intr, pose)?.depth)
}

/// Relative inverse depth `d_min / d`: 1 at the nearest valid pixel, falling
/// toward 0 with distance. Pixels without depth stay invalid and read as 0
/// through [`mono_value`].
pub fn mono_from_depth(depth: &Depth) -> Depth {
    let d_min = depth
        .data()
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(f64::INFINITY, f64::min);
    let data = depth
        .data()
        .iter()
        .map(|&d| if d.is_finite() { d_min / d } else { f64::NAN })
        .collect();
    Depth::new(depth.width(), depth.height(), data).expect("positive ratios")
}

/// Monocular relative depth of pixel `i`, with sky and background as 0.
#[inline]
pub fn mono_value(mono: &Depth, i: usize) -> f64 {
    mono.at_index(i).unwrap_or(0.0)
}

pub fn render_mono_reldepth(mesh: &Mesh, intr: &Intrinsics, pose: &Pose<f64>) -> Result<Depth> {
    Ok(mono_from_depth(&render_depth(mesh, intr, pose)?))
}
