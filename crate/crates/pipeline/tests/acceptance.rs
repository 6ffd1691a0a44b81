//! Acceptance gate: runs every criterion at its stated tolerance and prints one
//! PASS/FAIL line each. Exits non-zero if any criterion fails.

use std::io::Write;
use std::time::Instant;

use arbor_core::scale::apply_scale;
use arbor_core::{
    apply_transform, chamfer_l2, downsample, icp_align, jsd, scale_factor, Cloud, IcpParams, Mat3, Transform, Vec3,
    Vec3d,
};
use arbor_pipeline::config::{BackendSource, BackendSpec, ExperimentConfig};
use arbor_pipeline::report::Status;
use arbor_pipeline::{make_tables, oracle_backend, run_pipeline, DegradeSpec, ThroughputInput};
use arbor_qsm::{estimate_traits, tree_height, QsmParams};
use arbor_seg::{distance_filter, ground_mask, segment_tree, sky_mask, FrameBundle, KeepPolicy, SegConfig, Stage};
use arbor_sim::rng::child_seed;
use arbor_sim::{
    capture_frame, generate_tree, plan_trajectory, sample_surface, zed_intrinsics, GroundPlane, NoiseSpec, RowSpec,
    Scene, TreeModel, TreeParams, LABEL_BACKGROUND, LABEL_FIRST_MESH, LABEL_GROUND,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dataset_tree(index: u64) -> TreeModel {
    let d = ExperimentConfig::default().dataset;
    generate_tree(&d.ranges.draw(&d.base, d.seed, index)).unwrap()
}

fn mape(pairs: &[(f64, f64)]) -> f64 {
    let v: Vec<f64> = pairs.iter().map(|(e, g)| 100.0 * ((e - g) / g).abs()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn gt_traits_reproduced() -> Outcome {
    let start = Instant::now();
    let params = QsmParams::default();
    let (mut dia, mut br) = (Vec::new(), Vec::new());
    let mut unavailable = 0;
    for i in 0..30u64 {
        let t = dataset_tree(i);
        let cloud = sample_surface(&t.mesh, 100_000, child_seed(99, i)).unwrap();
        let (r, _) = estimate_traits(&cloud, &params).unwrap();
        match (r.trunk_diameter, t.traits.trunk_diameter) {
            (Some(d), Some(g)) => dia.push((d, g)),
            _ => unavailable += 1,
        }
        br.push((r.branch_count as f64, t.traits.branch_count as f64));
    }
    let secs = start.elapsed().as_secs_f64();
    let (dm, bm) = (mape(&dia), mape(&br));
    outcome(
        unavailable == 0 && dm <= 5.0 && bm <= 10.0 && secs <= 300.0,
        format!("trunk MAPE {dm:.2}% (<= 5), branch MAPE {bm:.2}% (<= 10), {unavailable} unavailable, {secs:.1} s (<= 300)"),
    )
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Cloud {
    Cloud::new((0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()).unwrap()
}

fn brute_chamfer(a: &Cloud, b: &Cloud) -> f64 {
    let side = |x: &Cloud, y: &Cloud| {
        let mut s = 0.0;
        for p in x.points() {
            let mut best = f64::INFINITY;
            for q in y.points() {
                best = best.min(((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt());
            }
            s += best;
        }
        s / x.len() as f64
    };
    (side(a, b) + side(b, a)) * 0.5
}

/// Sorted-key histogram JSD, written without the library's voxel grid.
fn histogram_jsd(a: &Cloud, b: &Cloud, size: f64) -> f64 {
    let lo: Vec<f64> = (0..3)
        .map(|k| a.points().iter().chain(b.points()).map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let key = |p: &Vec3d| -> [i64; 3] { [0, 1, 2].map(|k| ((p[k] - lo[k]) / size).floor() as i64) };
    let mut ka: Vec<[i64; 3]> = a.points().iter().map(key).collect();
    let mut kb: Vec<[i64; 3]> = b.points().iter().map(key).collect();
    ka.sort_unstable();
    kb.sort_unstable();
    let count = |keys: &[[i64; 3]], k: &[i64; 3]| keys.partition_point(|x| x < k)..keys.partition_point(|x| x <= k);
    let mut all: Vec<[i64; 3]> = ka.iter().chain(&kb).copied().collect();
    all.sort_unstable();
    all.dedup();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut total = 0.0;
    for k in &all {
        let p = count(&ka, k).len() as f64 / na;
        let q = count(&kb, k).len() as f64 / nb;
        let m = 0.5 * (p + q);
        if p > 0.0 {
            total += 0.5 * p * (p / m).ln();
        }
        if q > 0.0 {
            total += 0.5 * q * (q / m).ln();
        }
    }
    total
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cd_mismatch = 0;
    for _ in 0..50 {
        let (a, b) = (random_cloud(&mut rng, 200), random_cloud(&mut rng, 200));
        cd_mismatch += usize::from(chamfer_l2(&a, &b).unwrap() != brute_chamfer(&a, &b));
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_cloud(&mut rng, 400);
        let b = Cloud::new(random_cloud(&mut rng, 400).points().iter().map(|p| Vec3::new(p.x * p.x, p.y, p.z)).collect()).unwrap();
        worst = worst.max((jsd(&a, &b, 0.1).unwrap() - histogram_jsd(&a, &b, 0.1)).abs());
    }
    let a = random_cloud(&mut rng, 300);
    let self_jsd = jsd(&a, &a, 0.05).unwrap();
    let far = a.map_points(|p| *p + Vec3::new(10.0, 0.0, 0.0));
    let disjoint = jsd(&a, &far, 0.05).unwrap();
    let ln2_err = (disjoint - std::f64::consts::LN_2).abs();
    outcome(
        cd_mismatch == 0 && worst <= 1e-12 && self_jsd.abs() <= 1e-12 && ln2_err <= 1e-12,
        format!(
            "chamfer mismatches {cd_mismatch}/50, jsd max diff {worst:.1e} over 20, jsd(A,A) {self_jsd:.1e}, |disjoint - ln 2| {ln2_err:.1e}"
        ),
    )
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3d {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

fn jitter(cloud: &Cloud, sigma: f64, rng: &mut ChaCha8Rng) -> Cloud {
    let n = Normal::new(0.0, sigma).unwrap();
    let pts = cloud.points().iter().map(|p| *p + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))).collect();
    Cloud::new(pts).unwrap()
}

fn icp_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = IcpParams::default();
    let (mut recovered, mut converged) = (0, 0);
    let (mut worst_t, mut worst_r) = (0.0f64, 0.0f64);
    let mut max_iter = 0;
    for k in 0..50u64 {
        let tree = dataset_tree(k % 10);
        let voxel = 0.005;
        let tgt = downsample(&sample_surface(&tree.mesh, 100_000, child_seed(k, 1)).unwrap(), voxel).unwrap();
        let src_world = downsample(&sample_surface(&tree.mesh, 100_000, child_seed(k, 2)).unwrap(), voxel).unwrap();
        let src_world = jitter(&src_world, 0.002, &mut rng);
        let angle = rng.random_range(0.0..30f64.to_radians());
        let rot = Mat3::from_axis_angle(&random_unit(&mut rng), angle);
        let shift = random_unit(&mut rng) * rng.random_range(0.0..0.5);
        let truth = Transform::new(rot, shift).unwrap();
        let src = apply_transform(&src_world, &truth.inverse());
        let r = icp_align(&src, &tgt, &params).unwrap();
        let (dr, dt) = r.transform.difference(&truth);
        let dr = dr.to_degrees();
        worst_t = worst_t.max(dt);
        worst_r = worst_r.max(dr);
        max_iter = max_iter.max(r.iterations);
        recovered += usize::from(dt <= 1e-3 && dr <= 0.1);
        converged += usize::from(r.converged && r.iterations <= 200);
    }
    outcome(
        recovered == 50 && converged * 100 >= 95 * 50,
        format!(
            "{recovered}/50 within 1 mm / 0.1 deg (worst {:.3} mm, {worst_r:.4} deg), {converged}/50 converged by the RMS-delta rule (max {max_iter} iterations)",
            worst_t * 1000.0
        ),
    )
}

fn row_tree(seed: u64, x: f64) -> arbor_core::Mesh {
    let t = generate_tree(&TreeParams { seed, ..Default::default() }).unwrap();
    t.mesh.map_vertices(|v| *v + Vec3::new(x, 0.0, 0.0)).unwrap()
}

fn segmentation_scene() -> Outcome {
    let intr = zed_intrinsics();
    let meshes = [row_tree(6, 0.0), row_tree(7, -1.5), row_tree(8, 1.5)];
    let scene = Scene { meshes: meshes.iter().collect(), ground: Some(GroundPlane::default()) };
    let row = RowSpec { n_frames: 15, ..Default::default() };
    let cfg = SegConfig { keep: KeepPolicy::NearestRowPosition { along: 0.0 }, ..Default::default() };
    let mut worst_iou = 1.0f64;
    // [far, sky, ground, cluster]: (target pixels reaching the end of the stage removed, target pixels)
    let mut recall = [(0usize, 0usize); 4];
    let mut monotone = true;
    for (f, pose) in plan_trajectory(&row).unwrap().iter().enumerate() {
        let noise = NoiseSpec { dropout_edge_px: 0, seed: f as u64, ..Default::default() };
        let c = capture_frame(&scene, &intr, pose, &noise).unwrap();
        let b = FrameBundle::new(c.depth.clone(), c.mono.clone(), intr, c.pose).unwrap();
        let seg = segment_tree(&b, &cfg).unwrap();
        let labels = &c.clean.labels;
        let (mut inter, mut union) = (0usize, 0usize);
        for (i, &l) in labels.iter().enumerate() {
            let (a, t) = (seg.mask.keep(i), l == LABEL_FIRST_MESH);
            inter += usize::from(a && t);
            union += usize::from(a || t);
        }
        worst_iou = worst_iou.min(inter as f64 / union as f64);
        let stages = [
            distance_filter(&b.depth, cfg.max_range).unwrap(),
            sky_mask(&b.mono, cfg.tau_sky).unwrap(),
            ground_mask(&b, cfg.z_ground).unwrap(),
        ];
        let prov = seg.mask.provenance();
        for (i, &l) in labels.iter().enumerate() {
            if seg.mask.keep(i) && !stages.iter().all(|s| s.keep(i)) {
                monotone = false;
            }
            let clean_depth = c.clean.depth.at_index(i).unwrap_or(f64::INFINITY);
            let class = if l == LABEL_BACKGROUND {
                Some(1)
            } else if clean_depth > cfg.max_range {
                Some(0)
            } else if l == LABEL_GROUND {
                Some(2)
            } else if l > LABEL_FIRST_MESH {
                Some(3)
            } else {
                None
            };
            if let Some(k) = class {
                let removed_by = match prov[i] {
                    Stage::Kept => usize::MAX,
                    Stage::Far => 0,
                    Stage::Sky => 1,
                    Stage::Ground => 2,
                    Stage::Cluster => 3,
                };
                recall[k].1 += 1;
                recall[k].0 += usize::from(removed_by <= k);
            }
        }
    }
    let r: Vec<f64> = recall.iter().map(|&(hit, n)| if n == 0 { 1.0 } else { hit as f64 / n as f64 }).collect();
    outcome(
        worst_iou >= 0.95 && r.iter().all(|&x| x >= 0.99) && monotone,
        format!(
            "min IoU {worst_iou:.4} over 15 frames, stage recall far {:.4} sky {:.4} ground {:.4} cluster {:.4}, monotone {monotone}",
            r[0], r[1], r[2], r[3]
        ),
    )
}

fn scale_closure() -> Outcome {
    let params = QsmParams::default();
    let (mut worst, mut topo_ok) = (0.0f64, 0);
    for i in 0..20u64 {
        let tree = dataset_tree(i);
        let spec = DegradeSpec { strip_scale: true, seed: child_seed(5, i), ..Default::default() };
        let stripped = oracle_backend(&tree, &spec).unwrap();
        let metric = oracle_backend(&tree, &DegradeSpec { strip_scale: false, ..spec }).unwrap();
        let h_ref = tree_height(&metric.cloud).unwrap();
        let s = scale_factor(h_ref, tree_height(&stripped.cloud).unwrap()).unwrap();
        let restored = apply_scale(&stripped.cloud, s.s, None).unwrap();
        worst = worst.max((tree_height(&restored).unwrap() - h_ref).abs() / h_ref);
        let (a, _) = estimate_traits(&restored, &params).unwrap();
        let (b, _) = estimate_traits(&metric.cloud, &params).unwrap();
        topo_ok += usize::from(a.branch_count == b.branch_count);
    }
    outcome(
        worst <= 1e-9 && topo_ok == 20,
        format!("max relative height error {worst:.1e} over 20 (<= 1e-9), branch count unchanged {topo_ok}/20"),
    )
}

fn degradation_monotonicity() -> Outcome {
    let tree = dataset_tree(0);
    let gt = sample_surface(&tree.mesh, 100_000, 12345).unwrap();
    let median_cd = |sigma: f64, fraction: f64| {
        median(
            (0..10u64)
                .map(|seed| {
                    let spec = DegradeSpec { noise_sigma: sigma, subsample_fraction: fraction, seed, ..Default::default() };
                    chamfer_l2(&oracle_backend(&tree, &spec).unwrap().cloud, &gt).unwrap()
                })
                .collect(),
        )
    };
    let by_sigma: Vec<f64> = [0.0, 0.002, 0.005, 0.010].iter().map(|&s| median_cd(s, 1.0)).collect();
    let by_fraction: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&f| median_cd(0.0, f)).collect();
    let ok = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" <= ");
    outcome(
        ok(&by_sigma) && ok(&by_fraction),
        format!("median CD by sigma {}; by fraction {}", fmt(&by_sigma), fmt(&by_fraction)),
    )
}

fn small_config(trees: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.trees = trees;
    cfg.execution.keep_frames = false;
    cfg
}

fn trait_unavailable_pathway() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(3);
    cfg.backends.push(BackendSpec {
        name: "degraded".into(),
        source: BackendSource::Oracle {
            spec: DegradeSpec { subsample_fraction: 0.1, noise_sigma: 0.02, seed: 17, ..Default::default() },
        },
    });
    let out = match run_pipeline(&cfg, dir.path()) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("pipeline aborted: {e}")),
    };
    let unavailable = out
        .report
        .trees
        .iter()
        .filter(|t| t.methods.iter().any(|m| m.method == "degraded" && matches!(m.status, Status::TraitUnavailable { .. })))
        .count();
    let tables = make_tables(&out.report);
    let dashes = tables
        .as_ref()
        .map(|t| t.diameter_md.lines().any(|l| l.starts_with("| degraded |") && l.contains("--")))
        .unwrap_or(false);
    let on_disk = dir.path().join("tables/trunk_diameter.md").exists();
    outcome(
        unavailable >= 1 && tables.is_ok() && dashes && on_disk,
        format!("degraded oracle trait-unavailable on {unavailable}/3 trees, tables rendered {}, '--' cells {dashes}", tables.is_ok()),
    )
}

fn end_to_end_determinism() -> Outcome {
    let cfg = small_config(30);
    let start = Instant::now();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        if let Err(e) = run_pipeline(&cfg, dir.path()) {
            return outcome(false, format!("pipeline aborted: {e}"));
        }
        reports.push(std::fs::read(dir.path().join("report.json")).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let same = reports[0] == reports[1];
    outcome(
        same && secs <= 900.0,
        format!("report bytes identical {same} ({} bytes), two 30-tree runs in {secs:.0} s (<= 900)", reports[0].len()),
    )
}

fn throughput_ratio() -> Outcome {
    let r = ThroughputInput { reference_hours: 3.0, robot_seconds: 30.0, trees: 6 }.ratio().unwrap();
    outcome(r.ratio == 360.0, format!("ratio {} (expected exactly 360)", r.ratio))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("GT-baseline trait reproduction", gt_traits_reproduced),
        ("metric correctness by oracle", metric_oracles),
        ("ICP recovery", icp_recovery),
        ("segmentation on labeled scenes", segmentation_scene),
        ("scale-retrieval closure", scale_closure),
        ("degradation monotonicity", degradation_monotonicity),
        ("trait-unavailable pathway", trait_unavailable_pathway),
        ("end-to-end determinism", end_to_end_determinism),
        ("throughput statistic", throughput_ratio),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut out = std::io::stdout();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        writeln!(out, "[{tag}] {}. {name}: {} [{:.1} s]", i + 1, o.detail, start.elapsed().as_secs_f64()).unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
