use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arbor_core::io::{read_json, read_obj, read_ply, write_json, write_ply};
use arbor_core::metrics::geom_metrics;
use arbor_core::scale::apply_scale;
use arbor_core::{apply_transform, downsample, icp_align, scale_factor, Cloud, IcpParams};
use arbor_pipeline::backend::ExpectedKind;
use arbor_pipeline::config::ExperimentConfig;
use arbor_pipeline::{
    find_backend_file, ingest_external, make_tables, oracle_from_mesh, run_pipeline, DegradeSpec, EvalReport,
    ThroughputInput,
};
use arbor_qsm::{estimate_traits, tree_height, QsmParams};
use arbor_seg::{read_frames, segment_tree, write_mask_outputs, SegConfig, SegError};
use arbor_sim::rng::child_seed;
use arbor_sim::{
    capture_row, generate_tree, sample_surface, sample_view_count, write_frame_bundle, write_tree, GroundPlane,
    NoiseSpec, RowSpec, TreeParamRanges, TreeParams,
};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "arbor", version, about = "Synthetic orchard-tree reconstruction and trait evaluation")]
struct Cli {
    /// Default output root for commands run without --out.
    #[arg(long, env = "ARBOR_OUT", global = true)]
    out_root: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate procedural trees with ground-truth traits.
    Gen {
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Parameter ranges (JSON).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Base parameters the ranges perturb (JSON).
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a simulated row pass past one tree mesh.
    Render {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        row: Option<PathBuf>,
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Inclusive view-count range, `LO..HI`.
        #[arg(long, default_value = "15..30")]
        views: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_ground: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment the tree out of a frame bundle and fuse the kept points.
    Segment {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        cfg: Option<PathBuf>,
        #[arg(long, default_value_t = 0.005)]
        voxel: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degrade ground-truth meshes into oracle reconstructions.
    Oracle {
        /// Directory written by `gen`.
        #[arg(long)]
        trees: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate and convert an external backend drop to point clouds.
    Ingest {
        #[arg(long)]
        backend: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        density: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rescale a reconstruction so its height matches a reference cloud.
    Scale {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        rec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rigidly align a source cloud onto a target with ICP.
    Register {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// ICP parameters (JSON).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Downsample both clouds to this voxel size first; 0 disables.
        #[arg(long, default_value_t = 0.005)]
        voxel: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the aligned source cloud here.
        #[arg(long)]
        aligned: Option<PathBuf>,
    },
    /// Chamfer and JSD of every prediction against its ground truth.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        voxel: f64,
        #[arg(long, default_value_t = 100_000)]
        gt_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract trunk diameter, branch count and height from a cloud.
    Traits {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        skeleton: Option<PathBuf>,
    },
    /// Run the full experiment described by a config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render CSV and Markdown tables from a report.
    Tables {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires_all = ["robot_seconds", "trees"])]
        reference_hours: Option<f64>,
        #[arg(long)]
        robot_seconds: Option<f64>,
        #[arg(long)]
        trees: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

type CmdResult = Result<ExitCode, Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn load_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, Failure> {
    match path {
        Some(p) => read_json(p).map_err(config),
        None => Ok(T::default()),
    }
}

fn out_dir(out: Option<PathBuf>, root: &Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    out.or_else(|| root.as_ref().map(|r| r.join(name)))
        .ok_or_else(|| Failure::Config(format!("{name}: pass --out or set ARBOR_OUT")))
}

fn save<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(runtime)?;
    }
    write_json(path, value).map_err(runtime)
}

fn load_cloud(path: &Path) -> Result<Cloud, Failure> {
    read_ply(path).map(|d| d.cloud).map_err(runtime)
}

fn parse_range(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Config(format!("view range {s:?} is not LO..HI"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo = lo.trim().parse().map_err(|_| bad())?;
    let hi = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

fn tree_ids(dir: &Path, ext: &str) -> Result<Vec<String>, Failure> {
    let mut ids: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .collect();
    ids.sort();
    Ok(ids)
}

fn partial(failed: usize) -> ExitCode {
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn gen(count: usize, seed: u64, params: Option<PathBuf>, base: Option<PathBuf>, out: PathBuf) -> CmdResult {
    let ranges: TreeParamRanges = load_or_default(&params)?;
    let base: TreeParams = load_or_default(&base)?;
    ranges.validate().map_err(config)?;
    base.validate().map_err(config)?;
    for i in 0..count {
        let model = generate_tree(&ranges.draw(&base, seed, i as u64)).map_err(runtime)?;
        write_tree(&out, &arbor_pipeline::run::tree_id(i), &model).map_err(runtime)?;
    }
    println!("wrote {count} trees to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn render(tree: PathBuf, row: Option<PathBuf>, noise: Option<PathBuf>, views: String, seed: u64, no_ground: bool, out: PathBuf) -> CmdResult {
    let row: RowSpec = load_or_default(&row)?;
    let mut noise: NoiseSpec = load_or_default(&noise)?;
    noise.validate().map_err(config)?;
    let (lo, hi) = parse_range(&views)?;
    let n_frames = sample_view_count(seed, lo, hi).map_err(config)?;
    noise.seed = child_seed(seed, 2);
    let mesh = read_obj(&tree).map_err(runtime)?;
    let row = RowSpec { n_frames, ..row };
    let intr = arbor_sim::zed_intrinsics();
    let ground = (!no_ground).then(GroundPlane::default);
    let caps = capture_row(&[&mesh], ground, &row, &intr, &noise).map_err(runtime)?;
    let frames: Vec<_> = caps.into_iter().map(|c| (c.depth, c.mono, c.pose)).collect();
    write_frame_bundle(&out, &intr, &frames).map_err(runtime)?;
    println!("rendered {n_frames} frames to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn segment(frames: PathBuf, cfg: Option<PathBuf>, voxel: f64, out: PathBuf) -> CmdResult {
    let cfg: SegConfig = load_or_default(&cfg)?;
    let bundles = read_frames(&frames).map_err(runtime)?;
    let mut parts = Vec::new();
    for (i, b) in bundles.iter().enumerate() {
        let stem = format!("frame_{i:04}");
        match segment_tree(b, &cfg) {
            Ok(seg) => {
                write_mask_outputs(&out, &stem, &seg.mask).map_err(runtime)?;
                parts.push(seg.cloud);
            }
            Err(SegError::Empty { counts }) => eprintln!("{stem}: nothing kept ({counts:?})"),
            Err(e) => return Err(runtime(format!("{stem}: {e}"))),
        }
    }
    if parts.is_empty() {
        return Err(runtime("no frame kept any tree pixels"));
    }
    let fused = downsample(&Cloud::concat(parts.iter()), voxel).map_err(runtime)?;
    write_ply(out.join("fused.ply"), &fused).map_err(runtime)?;
    println!("{} of {} frames kept points; fused cloud has {} points", parts.len(), bundles.len(), fused.len());
    Ok(ExitCode::SUCCESS)
}

fn oracle(trees: PathBuf, spec: PathBuf, out: PathBuf) -> CmdResult {
    let spec: DegradeSpec = read_json(&spec).map_err(config)?;
    spec.validate().map_err(config)?;
    let ids = tree_ids(&trees, "obj")?;
    if ids.is_empty() {
        return Err(runtime(format!("no tree meshes in {}", trees.display())));
    }
    std::fs::create_dir_all(&out).map_err(runtime)?;
    let mut failed = 0;
    for (i, id) in ids.iter().enumerate() {
        let r = read_obj(trees.join(format!("{id}.obj")))
            .map_err(|e| e.to_string())
            .and_then(|m| oracle_from_mesh(&m, &spec.for_item(i as u64)).map_err(|e| e.to_string()));
        match r {
            Ok(recon) => {
                write_ply(out.join(format!("{id}.ply")), &recon.cloud).map_err(runtime)?;
                if let Some(f) = recon.stripped_factor {
                    save(&out.join(format!("{id}.scale.json")), &serde_json::json!({ "stripped_factor": f }))?;
                }
            }
            Err(e) => {
                eprintln!("{id}: {e}");
                failed += 1;
            }
        }
    }
    if spec.strip_scale {
        save(&out.join("meta.json"), &serde_json::json!({ "unitless_scale": true }))?;
    }
    Ok(partial(failed))
}

fn ingest(backend: PathBuf, density: usize, seed: u64, out: PathBuf) -> CmdResult {
    let mut ids = tree_ids(&backend, "ply")?;
    ids.extend(tree_ids(&backend, "obj")?);
    ids.sort();
    ids.dedup();
    std::fs::create_dir_all(&out).map_err(runtime)?;
    let mut failed = 0;
    let mut summary = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let path = find_backend_file(&backend, id).expect("listed above");
        match ingest_external(&path, ExpectedKind::Any, density, child_seed(seed, i as u64)) {
            Ok(r) => {
                write_ply(out.join(format!("{id}.ply")), &r.cloud).map_err(runtime)?;
                summary.push(serde_json::json!({
                    "tree_id": id, "backend": r.backend, "points": r.cloud.len(),
                    "from_mesh": r.mesh.is_some(), "unitless_scale": r.unitless_scale,
                }));
            }
            Err(e) => {
                eprintln!("{id}: {e}");
                summary.push(serde_json::json!({ "tree_id": id, "error": e.to_string() }));
                failed += 1;
            }
        }
    }
    save(&out.join("ingest.json"), &summary)?;
    Ok(partial(failed))
}

fn scale(reference: PathBuf, rec: PathBuf, out: PathBuf, report: Option<PathBuf>) -> CmdResult {
    let h_ref = tree_height(&load_cloud(&reference)?).map_err(runtime)?;
    let rec = load_cloud(&rec)?;
    let h_rec = tree_height(&rec).map_err(runtime)?;
    let s = scale_factor(h_ref, h_rec).map_err(runtime)?;
    write_ply(&out, &apply_scale(&rec, s.s, None).map_err(runtime)?).map_err(runtime)?;
    println!("scale {:.6} (reference {:.4} m, reconstruction {:.4})", s.s, s.h_ref, s.h_rec);
    if let Some(p) = report {
        save(&p, &s)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn register(src: PathBuf, tgt: PathBuf, params: Option<PathBuf>, voxel: f64, out: PathBuf, report: Option<PathBuf>, aligned: Option<PathBuf>) -> CmdResult {
    let params: IcpParams<f64> = load_or_default(&params)?;
    let src_full = load_cloud(&src)?;
    let tgt = load_cloud(&tgt)?;
    let (s, t) = if voxel > 0.0 {
        (downsample(&src_full, voxel).map_err(runtime)?, downsample(&tgt, voxel).map_err(runtime)?)
    } else {
        (src_full.clone(), tgt)
    };
    let r = icp_align(&s, &t, &params).map_err(runtime)?;
    save(&out, &r.transform)?;
    if let Some(p) = report {
        save(&p, &r)?;
    }
    if let Some(p) = aligned {
        write_ply(p, &apply_transform(&src_full, &r.transform)).map_err(runtime)?;
    }
    println!("{} iterations, final rms {:.6} m, converged {}", r.iterations, r.final_rms(), r.converged);
    Ok(partial(usize::from(!r.converged)))
}

fn metrics(pred: PathBuf, gt: PathBuf, voxel: f64, gt_points: usize, out: PathBuf) -> CmdResult {
    let ids = tree_ids(&pred, "ply")?;
    if ids.is_empty() {
        return Err(runtime(format!("no .ply predictions in {}", pred.display())));
    }
    let mut rows = Vec::new();
    let mut csv = String::from("tree_id,chamfer_l2,jsd\n");
    let mut failed = 0;
    for (i, id) in ids.iter().enumerate() {
        let r = (|| -> Result<_, String> {
            let p = read_ply(pred.join(format!("{id}.ply"))).map_err(|e| e.to_string())?.cloud;
            let g = match find_backend_file(&gt, id) {
                Some(f) if f.extension().is_some_and(|e| e == "ply") => read_ply(f).map_err(|e| e.to_string())?.cloud,
                Some(f) => {
                    let m = read_obj(f).map_err(|e| e.to_string())?;
                    sample_surface(&m, gt_points, child_seed(0, i as u64)).map_err(|e| e.to_string())?
                }
                None => return Err(format!("no ground truth for {id}")),
            };
            geom_metrics(&p, &g, voxel).map_err(|e| e.to_string())
        })();
        match r {
            Ok(m) => {
                csv.push_str(&format!("{id},{:.6},{:.6}\n", m.chamfer_l2, m.jsd));
                rows.push(serde_json::json!({ "tree_id": id, "metrics": m }));
            }
            Err(e) => {
                eprintln!("{id}: {e}");
                rows.push(serde_json::json!({ "tree_id": id, "error": e }));
                failed += 1;
            }
        }
    }
    save(&out.join("metrics.json"), &rows)?;
    std::fs::write(out.join("metrics.csv"), csv).map_err(runtime)?;
    Ok(partial(failed))
}

fn traits(cloud: PathBuf, params: Option<PathBuf>, out: PathBuf, skeleton: Option<PathBuf>) -> CmdResult {
    let params: QsmParams = load_or_default(&params)?;
    params.validate().map_err(config)?;
    let (report, skel) = estimate_traits(&load_cloud(&cloud)?, &params).map_err(runtime)?;
    save(&out, &report)?;
    if let Some(p) = skeleton {
        save(&p, &skel)?;
    }
    match report.trunk_diameter {
        Some(d) => println!("trunk diameter {:.4} m, {} branches, height {:.3} m", d, report.branch_count, report.tree_height),
        None => println!("trunk diameter unavailable, {} branches, height {:.3} m", report.branch_count, report.tree_height),
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cfg_path: Option<PathBuf>, out: Option<PathBuf>, workers: Option<usize>, root: &Option<PathBuf>) -> CmdResult {
    let mut cfg = match &cfg_path {
        Some(p) => ExperimentConfig::load(p).map_err(config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(w) = workers {
        cfg.execution.workers = w;
    }
    let out = out_dir(out.or_else(|| cfg.execution.output_dir.clone()), root, "run")?;
    let r = run_pipeline(&cfg, &out).map_err(|e| match e {
        arbor_pipeline::PipelineError::Config(e) => config(e),
        e => runtime(e),
    })?;
    println!("{}", make_tables(&r.report).map_err(runtime)?.geometry_md);
    println!("report written to {} in {:.1} s", out.join("report.json").display(), r.timings.total_seconds);
    Ok(partial(usize::from(r.has_failures())))
}

fn tables(report: PathBuf, out: PathBuf, hours: Option<f64>, seconds: Option<f64>, trees: Option<usize>) -> CmdResult {
    let mut report: EvalReport = read_json(&report).map_err(config)?;
    if let (Some(reference_hours), Some(robot_seconds), Some(trees)) = (hours, seconds, trees) {
        let t = ThroughputInput {
            reference_hours,
            robot_seconds,
            trees,
        };
        report.throughput = Some(t.ratio().map_err(config)?);
    }
    let t = make_tables(&report).map_err(runtime)?;
    t.write(&out).map_err(runtime)?;
    if let Some(tp) = &report.throughput {
        save(&out.join("throughput.json"), tp)?;
        println!("throughput ratio {:.1}x", tp.ratio);
    }
    print!("{}", t.geometry_md);
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> CmdResult {
    let root = cli.out_root;
    match cli.cmd {
        Cmd::Gen { count, seed, params, base, out } => gen(count, seed, params, base, out_dir(out, &root, "trees")?),
        Cmd::Render { tree, row, noise, views, seed, no_ground, out } => {
            render(tree, row, noise, views, seed, no_ground, out_dir(out, &root, "frames")?)
        }
        Cmd::Segment { frames, cfg, voxel, out } => segment(frames, cfg, voxel, out_dir(out, &root, "segment")?),
        Cmd::Oracle { trees, spec, out } => oracle(trees, spec, out_dir(out, &root, "oracle")?),
        Cmd::Ingest { backend, density, seed, out } => ingest(backend, density, seed, out_dir(out, &root, "ingest")?),
        Cmd::Scale { reference, rec, out, report } => scale(reference, rec, out, report),
        Cmd::Register { src, tgt, params, voxel, out, report, aligned } => register(src, tgt, params, voxel, out, report, aligned),
        Cmd::Metrics { pred, gt, voxel, gt_points, out } => metrics(pred, gt, voxel, gt_points, out_dir(out, &root, "metrics")?),
        Cmd::Traits { cloud, params, out, skeleton } => traits(cloud, params, out, skeleton),
        Cmd::Run { config, out, workers } => run(config, out, workers, &root),
        Cmd::Tables { report, out, reference_hours, robot_seconds, trees } => {
            tables(report, out_dir(out, &root, "tables")?, reference_hours, robot_seconds, trees)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
