//! Per-tree experiment: generate, render, segment, reconstruct, scale,
//! register, measure and extract traits.

use std::path::{Path, PathBuf};
use std::time::Instant;

use arbor_core::io::{write_json, write_ply};
use arbor_core::scale::apply_scale;
use arbor_core::{apply_transform, downsample, icp_align, metrics::geom_metrics, scale_factor, Cloud, Vec3};
use arbor_qsm::{estimate_traits, tree_height};
use arbor_seg::{read_frames, segment_tree, write_mask_outputs, SegError};
use arbor_sim::rng::child_seed;
use arbor_sim::{
    capture_row, generate_tree, sample_surface, sample_view_count, write_frame_bundle, write_tree, FrameFiles,
    GroundPlane, RowSpec, TreeModel,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{find_backend_file, ingest_external, oracle_backend, ExpectedKind, ReconRequest, ReconResult, RequestFrame};
use crate::config::{BackendSource, ConfigError, ExperimentConfig};
use crate::report::{aggregate, EvalReport, IcpSummary, MethodRecord, Provenance, Status, TreeRecord, GT_RESAMPLE, SENSOR};
use crate::tables::make_tables;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] arbor_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeTimings {
    pub tree_id: String,
    pub stages: Vec<StageTime>,
}

/// Wall-clock timings, kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub trees: Vec<TreeTimings>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: EvalReport,
    pub timings: Timings,
    pub dir: PathBuf,
}

impl RunOutput {
    /// True when any tree or method failed outright.
    pub fn has_failures(&self) -> bool {
        self.report.trees.iter().any(|t| {
            matches!(t.status, Status::Failed { .. }) || t.methods.iter().any(|m| matches!(m.status, Status::Failed { .. }))
        })
    }
}

pub fn tree_id(index: usize) -> String {
    format!("tree_{index:03}")
}

struct Clock {
    timings: TreeTimings,
    start: Instant,
}

impl Clock {
    fn new(id: &str) -> Self {
        Clock {
            timings: TreeTimings {
                tree_id: id.into(),
                stages: Vec::new(),
            },
            start: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.stages.push(StageTime {
            stage: stage.into(),
            seconds: (now - self.start).as_secs_f64(),
        });
        self.start = now;
    }
}

type Staged<T> = Result<T, (&'static str, String)>;

fn at<T, E: ToString>(stage: &'static str, r: Result<T, E>) -> Staged<T> {
    r.map_err(|e| (stage, e.to_string()))
}

/// Seeds derived for one tree; indices keep the streams apart.
mod seeds {
    pub const GT_SAMPLE: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const RESAMPLE: u64 = 3;
    pub const INGEST: u64 = 4;
    pub const NEIGHBOURS: u64 = u64::MAX;
}

/// Ground truth and sensor data shared by every method of one tree.
struct TreeInputs {
    model: TreeModel,
    gt: Cloud,
    gt_icp: Cloud,
    sensor: Cloud,
    views: usize,
}

fn neighbour_meshes(cfg: &ExperimentConfig, index: u64) -> arbor_core::Result<Vec<arbor_core::Mesh>> {
    let c = &cfg.capture;
    if c.neighbour_spacing <= 0.0 {
        return Ok(Vec::new());
    }
    let d = &cfg.dataset;
    let seed = child_seed(d.seed, seeds::NEIGHBOURS);
    [(-1.0, 2 * index), (1.0, 2 * index + 1)]
        .iter()
        .map(|&(side, k)| {
            let model = generate_tree(&d.ranges.draw(&d.base, seed, k))?;
            let shift = c.row.row_direction * (side * c.neighbour_spacing);
            model.mesh.map_vertices(|v| *v + shift)
        })
        .collect()
}

fn prepare_tree(cfg: &ExperimentConfig, index: usize, dir: &Path, clock: &mut Clock) -> Staged<TreeInputs> {
    let id = tree_id(index);
    let d = &cfg.dataset;
    let seed = child_seed(d.seed, index as u64);
    let params = d.ranges.draw(&d.base, d.seed, index as u64);
    let model = at("gen", generate_tree(&params))?;
    at("gen", write_tree(dir, &id, &model))?;
    clock.lap("gen");

    let gt = at("sample", sample_surface(&model.mesh, cfg.metrics.gt_points, child_seed(seed, seeds::GT_SAMPLE)))?;
    at("sample", write_ply(dir.join("gt.ply"), &gt))?;
    let gt_icp = at("sample", downsample(&gt, cfg.metrics.icp_voxel))?;
    clock.lap("sample");

    let c = &cfg.capture;
    let views = at("render", sample_view_count(seed, c.views[0], c.views[1]))?;
    let neighbours = at("render", neighbour_meshes(cfg, index as u64))?;
    let mut meshes = vec![&model.mesh];
    meshes.extend(neighbours.iter());
    let row = RowSpec {
        n_frames: views,
        trunk_origin: Vec3::zeros(),
        ..c.row.clone()
    };
    let noise = arbor_sim::NoiseSpec {
        seed: child_seed(seed, seeds::NOISE),
        ..c.noise.clone()
    };
    let ground = c.ground.then(GroundPlane::default);
    let captures = at("render", capture_row(&meshes, ground, &row, &c.intrinsics, &noise))?;
    let frames: Vec<_> = captures.into_iter().map(|k| (k.depth, k.mono, k.pose)).collect();
    let frame_dir = dir.join("frames");
    let files = at("render", write_frame_bundle(&frame_dir, &c.intrinsics, &frames))?;
    drop(frames);
    clock.lap("render");

    let bundles = at("segment", read_frames(&frame_dir))?;
    let mut parts = Vec::with_capacity(bundles.len());
    let mut request = ReconRequest {
        tree_id: id.clone(),
        intrinsics: frame_dir.join(arbor_sim::frames::INTRINSICS_FILE),
        frames: Vec::new(),
    };
    for (i, (b, f)) in bundles.iter().zip(&files).enumerate() {
        let stem = format!("frame_{i:04}");
        match segment_tree(b, &cfg.segmentation) {
            Ok(seg) => {
                at("segment", write_mask_outputs(&frame_dir, &stem, &seg.mask))?;
                request.frames.push(request_frame(&frame_dir, &stem, f));
                parts.push(seg.cloud);
            }
            Err(SegError::Empty { .. }) => log::debug!("{id} {stem}: nothing left after segmentation"),
            Err(e) => return Err(("segment", e.to_string())),
        }
    }
    if parts.is_empty() {
        return Err(("segment", "no frame kept any tree pixels".into()));
    }
    let fused = Cloud::concat(parts.iter());
    let fused = at("segment", slot_crop(&fused, c))?;
    let sensor = at("segment", downsample(&fused, c.fuse_voxel))?;
    at("segment", write_ply(dir.join("sensor.ply"), &sensor))?;
    if cfg.execution.keep_frames {
        at("segment", write_json(dir.join("request.json"), &request))?;
    } else {
        for f in &files {
            for p in [&f.depth, &f.mono] {
                let _ = std::fs::remove_file(p);
            }
        }
    }
    clock.lap("segment");
    Ok(TreeInputs {
        model,
        gt,
        gt_icp,
        sensor,
        views,
    })
}

/// Limits the fused cloud to the target tree's planting slot, half the tree
/// spacing either side of its trunk, when neighbours share the row.
fn slot_crop(cloud: &Cloud, c: &crate::config::CaptureSpec) -> arbor_core::Result<Cloud> {
    if c.neighbour_spacing <= 0.0 {
        return Ok(cloud.clone());
    }
    let dir = c
        .row
        .row_direction
        .normalized()
        .ok_or_else(|| arbor_core::Error::InvalidInput("row direction is zero".into()))?;
    let half = 0.5 * c.neighbour_spacing;
    let kept = cloud.select(|_, p| p.dot(&dir).abs() <= half);
    if kept.is_empty() {
        return Err(arbor_core::Error::InvalidInput("no fused point lies in the tree slot".into()));
    }
    Ok(kept)
}

fn request_frame(dir: &Path, stem: &str, f: &FrameFiles) -> RequestFrame {
    RequestFrame {
        mask: dir.join(format!("{stem}.mask.png")),
        depth: f.depth.clone(),
        mono: f.mono.clone(),
        pose: f.pose.clone(),
    }
}

/// Scale (when unitless), register onto the ground truth, measure, extract traits.
fn evaluate(cfg: &ExperimentConfig, name: &str, recon: ReconResult, inputs: &TreeInputs, h_ref: Option<f64>, dir: &Path) -> MethodRecord {
    let mut rec = MethodRecord::new(name);
    let result = (|| -> Staged<()> {
        let mut cloud = recon.cloud;
        if recon.unitless_scale {
            let h_ref = h_ref.ok_or(("scale", "no reference height from the sensor cloud".to_string()))?;
            let h_rec = at("scale", tree_height(&cloud))?;
            let s = at("scale", scale_factor(h_ref, h_rec))?;
            cloud = at("scale", apply_scale(&cloud, s.s, None))?;
            rec.scale = Some(s);
        }
        rec.points = cloud.len();
        let src = at("register", downsample(&cloud, cfg.metrics.icp_voxel))?;
        let icp = at("register", icp_align(&src, &inputs.gt_icp, &cfg.metrics.icp))?;
        rec.icp = Some(IcpSummary {
            final_rms: icp.final_rms(),
            iterations: icp.iterations,
            converged: icp.converged,
            inlier_fraction: icp.inlier_fraction,
        });
        let aligned = apply_transform(&cloud, &icp.transform);
        at("register", write_ply(dir.join(format!("{name}.ply")), &aligned))?;
        rec.geom = Some(at("metrics", geom_metrics(&aligned, &inputs.gt, cfg.metrics.voxel_size))?);
        match estimate_traits(&aligned, &cfg.qsm) {
            Ok((traits, _)) => {
                if let Some(reason) = &traits.diagnostics.unavailable_reason {
                    rec.status = Status::TraitUnavailable { reason: reason.clone() };
                }
                rec.traits = Some(traits);
            }
            Err(e) => rec.status = Status::TraitUnavailable { reason: e.to_string() },
        }
        Ok(())
    })();
    if let Err((stage, message)) = result {
        rec.status = Status::failed(stage, message);
    }
    let _ = write_json(dir.join(format!("{name}.json")), &rec);
    rec
}

fn process_tree(cfg: &ExperimentConfig, index: usize, root: &Path) -> (TreeRecord, TreeTimings) {
    let id = tree_id(index);
    let seed = child_seed(cfg.dataset.seed, index as u64);
    let dir = root.join("trees").join(&id);
    let mut clock = Clock::new(&id);
    let mut record = TreeRecord {
        tree_id: id.clone(),
        seed,
        views: 0,
        status: Status::Ok,
        ground_truth: None,
        methods: Vec::new(),
    };
    if let Err(e) = std::fs::create_dir_all(&dir) {
        record.status = Status::failed("setup", e);
        return (record, clock.timings);
    }
    let inputs = match prepare_tree(cfg, index, &dir, &mut clock) {
        Ok(i) => i,
        Err((stage, message)) => {
            log::warn!("{id}: {stage} failed: {message}");
            record.status = Status::Failed {
                stage: stage.into(),
                message,
            };
            return (record, clock.timings);
        }
    };
    record.views = inputs.views;
    record.ground_truth = Some(inputs.model.traits.clone());
    let h_ref = tree_height(&inputs.sensor).ok();
    let method_dir = dir.join("methods");
    if let Err(e) = std::fs::create_dir_all(&method_dir) {
        record.status = Status::failed("setup", e);
        return (record, clock.timings);
    }

    let resample = sample_surface(&inputs.model.mesh, cfg.metrics.gt_points, child_seed(seed, seeds::RESAMPLE)).map(|cloud| ReconResult {
        backend: GT_RESAMPLE.into(),
        cloud,
        mesh: None,
        unitless_scale: false,
        stripped_factor: None,
    });
    let sensor = ReconResult {
        backend: SENSOR.into(),
        cloud: inputs.sensor.clone(),
        mesh: None,
        unitless_scale: false,
        stripped_factor: None,
    };
    let mut candidates: Vec<(String, Result<ReconResult, (&'static str, String)>)> = vec![
        (GT_RESAMPLE.into(), at("sample", resample)),
        (SENSOR.into(), Ok(sensor)),
    ];
    for b in &cfg.backends {
        let r = match &b.source {
            BackendSource::Oracle { spec } => at("backend", oracle_backend(&inputs.model, &spec.for_item(index as u64))),
            BackendSource::External { dir: drop } => match find_backend_file(drop, &id) {
                Some(p) => at("ingest", ingest_external(&p, ExpectedKind::Any, cfg.metrics.gt_points, child_seed(seed, seeds::INGEST))),
                None => Err(("ingest", format!("no reconstruction for {id} in {}", drop.display()))),
            },
        };
        candidates.push((b.name.clone(), r));
    }
    clock.lap("backends");
    for (name, r) in candidates {
        let rec = match r {
            Ok(recon) => evaluate(cfg, &name, recon, &inputs, h_ref, &method_dir),
            Err((stage, message)) => MethodRecord {
                status: Status::Failed {
                    stage: stage.into(),
                    message,
                },
                ..MethodRecord::new(&name)
            },
        };
        record.methods.push(rec);
        clock.lap(&format!("method:{name}"));
    }
    (record, clock.timings)
}

/// Runs every tree of the experiment and writes `report.json`, `timings.json`
/// and `tables/` under `out`. Per-tree failures are recorded, not raised.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.execution.workers)
        .build()
        .map_err(|e| arbor_core::Error::InvalidInput(format!("worker pool: {e}")))?;
    let results: Vec<(TreeRecord, TreeTimings)> =
        pool.install(|| (0..cfg.dataset.trees).into_par_iter().map(|i| process_tree(cfg, i, out)).collect());
    let (trees, tree_timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = EvalReport {
        provenance: Provenance {
            config_hash: cfg.hash(),
            dataset_seed: cfg.dataset.seed,
            trees: cfg.dataset.trees,
            voxel_size: cfg.metrics.voxel_size,
            crate_version: env!("CARGO_PKG_VERSION").into(),
        },
        methods: aggregate(&trees),
        trees,
        throughput: cfg.throughput.as_ref().map(|t| t.ratio()).transpose()?,
    };
    write_json(out.join("report.json"), &report)?;
    let tables = make_tables(&report)?;
    tables.write(&out.join("tables"))?;
    let timings = Timings {
        total_seconds: start.elapsed().as_secs_f64(),
        trees: tree_timings,
    };
    write_json(out.join("timings.json"), &timings)?;
    Ok(RunOutput {
        report,
        timings,
        dir: out.to_path_buf(),
    })
}
