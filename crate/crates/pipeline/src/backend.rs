//! Reconstruction backends: ingestion of external OBJ/PLY drops and an oracle
//! that degrades ground truth in controlled ways.

use std::path::{Path, PathBuf};

use arbor_core::io::{read_json, read_obj, read_ply};
use arbor_core::scale::apply_scale;
use arbor_core::{Cloud, Intrinsics, Mesh, Pose, Vec3, Vec3d};
use arbor_sim::{sample_surface, TreeModel};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DENSITY: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Core(#[from] arbor_core::Error),
    #[error("{path}: empty geometry")]
    Empty { path: String },
    #[error("{path}: unsupported format (expected .obj or .ply)")]
    UnsupportedFormat { path: String },
    #[error("{path}: expected a {expected} but found a {found}")]
    WrongKind { path: String, expected: &'static str, found: &'static str },
    #[error("degenerate degradation: {0}")]
    Degenerate(String),
    #[error("invalid degrade spec: {0}")]
    InvalidSpec(String),
    #[error("request references missing file {0}")]
    MissingFile(String),
}

pub type BackendResult<T> = std::result::Result<T, BackendError>;

/// Region removed from an oracle cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Crop {
    /// Removes points with `normal · p > offset`.
    HalfSpace { normal: Vec3d, offset: f64 },
    /// Removes points whose azimuth about the vertical line through `center`
    /// falls in `[start_deg, end_deg)`, measured counter-clockwise from +x.
    Sector { center: [f64; 2], start_deg: f64, end_deg: f64 },
}

impl Crop {
    pub fn removes(&self, p: &Vec3d) -> bool {
        match self {
            Crop::HalfSpace { normal, offset } => normal.dot(p) > *offset,
            Crop::Sector { center, start_deg, end_deg } => {
                let az = (p.y - center[1]).atan2(p.x - center[0]).to_degrees().rem_euclid(360.0);
                let start = start_deg.rem_euclid(360.0);
                let span = end_deg - start_deg;
                if span >= 360.0 {
                    return true;
                }
                (az - start).rem_euclid(360.0) < span
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeSpec {
    /// Fraction of the cropped, jittered points kept, in `(0, 1]`.
    pub subsample_fraction: f64,
    /// Gaussian jitter per axis, meters.
    pub noise_sigma: f64,
    pub occlusion: Vec<Crop>,
    pub seed: u64,
    /// Multiply the output by a random factor and flag it as unitless.
    pub strip_scale: bool,
    /// Points sampled from the ground-truth mesh before degradation.
    pub points: usize,
}

impl Default for DegradeSpec {
    fn default() -> Self {
        DegradeSpec {
            subsample_fraction: 1.0,
            noise_sigma: 0.0,
            occlusion: Vec::new(),
            seed: 0,
            strip_scale: false,
            points: DEFAULT_DENSITY,
        }
    }
}

impl DegradeSpec {
    pub fn validate(&self) -> BackendResult<()> {
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(BackendError::InvalidSpec(format!(
                "subsample_fraction {} outside (0, 1]",
                self.subsample_fraction
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(BackendError::InvalidSpec(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        if self.points == 0 {
            return Err(BackendError::InvalidSpec("points must be positive".into()));
        }
        for c in &self.occlusion {
            let ok = match c {
                Crop::HalfSpace { normal, offset } => normal.is_finite() && normal.norm() > 0.0 && offset.is_finite(),
                Crop::Sector { center, start_deg, end_deg } => {
                    center.iter().all(|v| v.is_finite()) && start_deg.is_finite() && end_deg > start_deg
                }
            };
            if !ok {
                return Err(BackendError::InvalidSpec(format!("bad crop {c:?}")));
            }
        }
        Ok(())
    }

    /// Same degradation with the seed of item `index`.
    pub fn for_item(&self, index: u64) -> Self {
        DegradeSpec {
            seed: arbor_sim::rng::child_seed(self.seed, index),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub backend: String,
    pub cloud: Cloud,
    pub mesh: Option<Mesh>,
    /// True when the geometry has no metric scale and needs scale retrieval.
    pub unitless_scale: bool,
    /// Factor applied when the oracle stripped the scale.
    pub stripped_factor: Option<f64>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Samples the ground-truth mesh, then applies crops, jitter, an exact-count
/// subsample and optionally a random scale, in that order.
pub fn oracle_backend(model: &TreeModel, spec: &DegradeSpec) -> BackendResult<ReconResult> {
    oracle_from_mesh(&model.mesh, spec)
}

/// [`oracle_backend`] for a bare ground-truth mesh.
pub fn oracle_from_mesh(mesh: &Mesh, spec: &DegradeSpec) -> BackendResult<ReconResult> {
    spec.validate()?;
    let cloud = sample_surface(mesh, spec.points, spec.seed)?;
    let mut pts: Vec<Vec3d> = cloud
        .points()
        .iter()
        .copied()
        .filter(|p| !spec.occlusion.iter().any(|c| c.removes(p)))
        .collect();
    if pts.is_empty() {
        return Err(BackendError::Degenerate("crops remove every point".into()));
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        let mut r = rng(spec.seed, 1);
        for p in pts.iter_mut() {
            *p = *p + Vec3::new(normal.sample(&mut r), normal.sample(&mut r), normal.sample(&mut r));
        }
    }
    if spec.subsample_fraction < 1.0 {
        let keep = ((pts.len() as f64 * spec.subsample_fraction).round() as usize).max(1);
        let mut idx = sample(&mut rng(spec.seed, 2), pts.len(), keep).into_vec();
        idx.sort_unstable();
        pts = idx.into_iter().map(|i| pts[i]).collect();
    }
    let mut cloud = Cloud::new(pts)?;
    let mut stripped = None;
    if spec.strip_scale {
        // log-uniform in [1/4, 4]
        let f = 4f64.powf(rng(spec.seed, 3).random_range(-1.0..1.0));
        cloud = apply_scale(&cloud, f, None)?;
        stripped = Some(f);
    }
    Ok(ReconResult {
        backend: "oracle".into(),
        cloud,
        mesh: None,
        unitless_scale: spec.strip_scale,
        stripped_factor: stripped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedKind {
    #[default]
    Any,
    Mesh,
    Cloud,
}

/// Optional `meta.json` next to a backend's outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendMeta {
    pub unitless_scale: bool,
}

/// Loads one external reconstruction. Meshes are sampled to `density` points;
/// clouds are taken as they are.
pub fn ingest_external(path: &Path, kind: ExpectedKind, density: usize, seed: u64) -> BackendResult<ReconResult> {
    let shown = path.display().to_string();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (cloud, mesh) = match ext.as_deref() {
        Some("obj") => {
            if kind == ExpectedKind::Cloud {
                return Err(BackendError::WrongKind { path: shown, expected: "cloud", found: "mesh" });
            }
            let mesh = read_obj(path)?;
            if mesh.is_empty() {
                return Err(BackendError::Empty { path: shown });
            }
            (sample_surface(&mesh, density, seed)?, Some(mesh))
        }
        Some("ply") => {
            let data = read_ply(path)?;
            if data.cloud.is_empty() {
                return Err(BackendError::Empty { path: shown });
            }
            if data.faces.is_empty() {
                if kind == ExpectedKind::Mesh {
                    return Err(BackendError::WrongKind { path: shown, expected: "mesh", found: "cloud" });
                }
                (data.cloud, None)
            } else {
                if kind == ExpectedKind::Cloud {
                    return Err(BackendError::WrongKind { path: shown, expected: "cloud", found: "mesh" });
                }
                let mut tris = Vec::with_capacity(data.faces.len());
                for f in &data.faces {
                    // fan-triangulate polygons
                    for k in 1..f.len().saturating_sub(1) {
                        tris.push([f[0], f[k], f[k + 1]]);
                    }
                }
                let mesh = Mesh::new(data.cloud.into_points(), tris)?;
                if mesh.is_empty() {
                    return Err(BackendError::Empty { path: shown });
                }
                (sample_surface(&mesh, density, seed)?, Some(mesh))
            }
        }
        _ => return Err(BackendError::UnsupportedFormat { path: shown }),
    };
    let meta: BackendMeta = match path.parent().map(|d| d.join("meta.json")) {
        Some(m) if m.exists() => read_json(m)?,
        _ => BackendMeta::default(),
    };
    let backend = path
        .parent()
        .and_then(|d| d.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("external")
        .to_string();
    Ok(ReconResult {
        backend,
        cloud,
        mesh,
        unitless_scale: meta.unitless_scale,
        stripped_factor: None,
    })
}

/// Reconstruction file for `tree_id` in a backend directory, if any.
pub fn find_backend_file(dir: &Path, tree_id: &str) -> Option<PathBuf> {
    ["ply", "obj"].iter().map(|e| dir.join(format!("{tree_id}.{e}"))).find(|p| p.exists())
}

/// Everything a reconstruction backend receives for one tree: the masked
/// frame bundle on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconRequest {
    pub tree_id: String,
    pub intrinsics: PathBuf,
    pub frames: Vec<RequestFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestFrame {
    pub mask: PathBuf,
    pub depth: PathBuf,
    pub mono: PathBuf,
    pub pose: PathBuf,
}

impl ReconRequest {
    /// Checks that every referenced file exists and that the JSON files parse.
    pub fn validate(&self) -> BackendResult<()> {
        let exists = |p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(BackendError::MissingFile(p.display().to_string()))
            }
        };
        exists(&self.intrinsics)?;
        let intr: Intrinsics = read_json(&self.intrinsics)?;
        intr.validate()?;
        if self.frames.is_empty() {
            return Err(BackendError::Degenerate(format!("request for {} has no frames", self.tree_id)));
        }
        for f in &self.frames {
            for p in [&f.mask, &f.depth, &f.mono, &f.pose] {
                exists(p)?;
            }
            let _: Pose<f64> = read_json(&f.pose)?;
        }
        Ok(())
    }
}
