use arbor_core::{Depth, Intrinsics, Mesh, Transform, Vec3};
use arbor_seg::{
    cluster_filter, distance_filter, ground_mask, kmeans, segment_tree, sky_mask, FrameBundle, KeepPolicy, SegConfig,
    SegError, SegMask, Stage,
};
use arbor_sim::{
    capture_frame, generate_tree, plan_trajectory, Capture, GroundPlane, NoiseSpec, RowSpec, Scene, TreeParams,
    LABEL_BACKGROUND, LABEL_FIRST_MESH, LABEL_GROUND,
};
use proptest::prelude::*;

fn half_res() -> Intrinsics {
    Intrinsics::new(534.5, 534.5, 480.0, 300.0, 960, 600).unwrap()
}

fn bundle(c: &Capture, intr: &Intrinsics) -> FrameBundle {
    FrameBundle::new(c.depth.clone(), c.mono.clone(), *intr, c.pose).unwrap()
}

fn iou(mask: &SegMask, labels: &[u16], target: u16) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (i, &l) in labels.iter().enumerate() {
        let a = mask.keep(i);
        let b = l == target;
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    inter as f64 / union as f64
}

fn tree(seed: u64, x: f64) -> Mesh {
    let t = generate_tree(&TreeParams { seed, ..Default::default() }).unwrap();
    t.mesh.map_vertices(|v| *v + Vec3::new(x, 0.0, 0.0)).unwrap()
}

fn centre_pose() -> Transform {
    plan_trajectory(&RowSpec { n_frames: 1, ..Default::default() }).unwrap()[0]
}

#[test]
fn distance_filter_examples() {
    let all = Depth::new(4, 4, vec![2.0; 16]).unwrap();
    assert_eq!(distance_filter(&all, 3.0).unwrap().kept_count(), 16);
    assert_eq!(distance_filter(&Depth::invalid(4, 4), 3.0).unwrap().kept_count(), 0);
    let half = Depth::new(4, 4, (0..16).map(|i| if i < 8 { 2.0 } else { 5.0 }).collect()).unwrap();
    let m = distance_filter(&half, 3.0).unwrap();
    assert_eq!(m.bits(), (0..16).map(|i| i < 8).collect::<Vec<_>>());
    assert!(distance_filter(&all, 0.0).is_err());
}

#[test]
fn sky_mask_examples() {
    let mono = Depth::new(2, 1, vec![f64::NAN, 1.0]).unwrap();
    let m = sky_mask(&mono, 0.05).unwrap();
    assert_eq!(m.provenance(), &[Stage::Sky, Stage::Kept]);
    assert!(sky_mask(&mono, 1.0).is_err());
}

#[test]
fn ground_mask_examples() {
    let intr = Intrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
    let pose = arbor_sim::plan_trajectory(&RowSpec { n_frames: 1, camera_offset: 2.0, camera_height: 1.0, ..Default::default() })
        .unwrap()[0];
    let scene = Scene { meshes: vec![], ground: Some(GroundPlane::default()) };
    let c = capture_frame(&scene, &intr, &pose, &NoiseSpec::none()).unwrap();
    let b = bundle(&c, &intr);
    let m = ground_mask(&b, 0.05).unwrap();
    let plane = c.clean.labels.iter().filter(|&&l| l == LABEL_GROUND).count();
    assert!(plane > 0);
    assert_eq!(m.counts().ground, plane);
    // a point at z = 0.5 straight ahead of a camera at 0.5 m height
    let pose = Transform::new(*pose.rotation(), Vec3::new(0.0, -2.0, 0.5)).unwrap();
    let d = Depth::new(64, 48, vec![2.0; 64 * 48]).unwrap();
    let b = FrameBundle::new(d.clone(), d, intr, pose).unwrap();
    assert!(ground_mask(&b, 0.05).unwrap().keep(24 * 64 + 32));
}

#[test]
fn sky_mask_recall_on_rendered_frame() {
    let intr = half_res();
    let t = tree(1, 0.0);
    let scene = Scene { meshes: vec![&t], ground: Some(GroundPlane::default()) };
    let c = capture_frame(&scene, &intr, &centre_pose(), &NoiseSpec::none()).unwrap();
    let m = sky_mask(&c.mono, 0.05).unwrap();
    let bg: Vec<usize> = (0..c.clean.labels.len()).filter(|&i| c.clean.labels[i] == LABEL_BACKGROUND).collect();
    let tr: Vec<usize> = (0..c.clean.labels.len()).filter(|&i| c.clean.labels[i] == LABEL_FIRST_MESH).collect();
    let bg_removed = bg.iter().filter(|&&i| !m.keep(i)).count() as f64 / bg.len() as f64;
    let tree_removed = tr.iter().filter(|&&i| !m.keep(i)).count() as f64 / tr.len() as f64;
    assert!(bg_removed >= 0.99 && tree_removed <= 0.01, "{bg_removed} {tree_removed}");
}

#[test]
fn single_tight_cluster_with_k1_is_unchanged() {
    let intr = half_res();
    let t = tree(2, 0.0);
    let c = capture_frame(&Scene { meshes: vec![&t], ground: None }, &intr, &centre_pose(), &NoiseSpec::none()).unwrap();
    let b = bundle(&c, &intr);
    let m = distance_filter(&b.depth, 10.0).unwrap();
    let out = cluster_filter(&b, &m, &SegConfig { k: 1, ..Default::default() }).unwrap();
    assert_eq!(out.mask, m);
}

#[test]
fn centered_tree_beats_far_neighbour() {
    // camera 1.2 m down the row from tree a; tree b another 2.3 m beyond it
    let intr = half_res();
    let a = tree(3, 0.0);
    let b_mesh = tree(4, 3.5);
    let row = RowSpec { n_frames: 1, trunk_origin: Vec3::new(1.2, 0.0, 0.0), ..Default::default() };
    let pose = plan_trajectory(&row).unwrap()[0];
    let c = capture_frame(&Scene { meshes: vec![&a, &b_mesh], ground: None }, &intr, &pose, &NoiseSpec::none()).unwrap();
    let cols = |label: u16| {
        let v: Vec<f64> = (0..c.clean.labels.len()).filter(|&i| c.clean.labels[i] == label).map(|i| (i % 960) as f64).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(cols(LABEL_FIRST_MESH + 1) - cols(LABEL_FIRST_MESH) > 480.0);
    let b = bundle(&c, &intr);
    let m = distance_filter(&b.depth, 20.0).unwrap();
    let cfg = SegConfig { k: 2, merge_radius: 0.0, ..Default::default() };
    let out = cluster_filter(&b, &m, &cfg).unwrap();
    assert!(iou(&out.mask, &c.clean.labels, LABEL_FIRST_MESH) > 0.999);
}

#[test]
fn single_tree_scene_keeps_whole_tree() {
    let intr = half_res();
    let t = tree(5, 0.0);
    let c = capture_frame(&Scene { meshes: vec![&t], ground: Some(GroundPlane::default()) }, &intr, &centre_pose(), &NoiseSpec::none())
        .unwrap();
    let seg = segment_tree(&bundle(&c, &intr), &SegConfig { max_range: 6.0, z_ground: 0.01, ..Default::default() }).unwrap();
    let score = iou(&seg.mask, &c.clean.labels, LABEL_FIRST_MESH);
    assert!(score >= 0.99, "{score}");
    assert_eq!(seg.cloud.len(), seg.mask.kept_count());
    assert_eq!(seg.counts().total(), 960 * 600);
}

#[test]
fn ground_only_scene_is_empty_segmentation() {
    let intr = half_res();
    let c = capture_frame(&Scene { meshes: vec![], ground: Some(GroundPlane::default()) }, &intr, &centre_pose(), &NoiseSpec::none())
        .unwrap();
    match segment_tree(&bundle(&c, &intr), &SegConfig::default()) {
        Err(SegError::Empty { counts }) => {
            assert_eq!(counts.kept, 0);
            assert_eq!(counts.total(), 960 * 600);
            assert!(counts.ground > 0 && counts.far > 0);
        }
        other => panic!("expected empty segmentation, got {other:?}"),
    }
}

#[test]
fn three_tree_row_keeps_centre_tree() {
    let intr = half_res();
    let meshes = [tree(6, 0.0), tree(7, -1.5), tree(8, 1.5)];
    let scene = Scene { meshes: meshes.iter().collect(), ground: Some(GroundPlane::default()) };
    let row = RowSpec { n_frames: 5, speed: 0.89408 * 5.0, ..Default::default() };
    let cfg = SegConfig { keep: KeepPolicy::NearestRowPosition { along: 0.0 }, ..Default::default() };
    for pose in plan_trajectory(&row).unwrap() {
        let noise = NoiseSpec { dropout_edge_px: 0, ..Default::default() };
        let c = capture_frame(&scene, &intr, &pose, &noise).unwrap();
        let b = bundle(&c, &intr);
        let seg = segment_tree(&b, &cfg).unwrap();
        let score = iou(&seg.mask, &c.clean.labels, LABEL_FIRST_MESH);
        assert!(score >= 0.95, "{score}");
        // monotone: the final keep set is inside every stage's keep set
        let stages = [
            distance_filter(&b.depth, cfg.max_range).unwrap(),
            sky_mask(&b.mono, cfg.tau_sky).unwrap(),
            ground_mask(&b, cfg.z_ground).unwrap(),
        ];
        for i in 0..seg.mask.provenance().len() {
            if seg.mask.keep(i) {
                assert!(stages.iter().all(|s| s.keep(i)));
            }
        }
        let again = segment_tree(&b, &cfg).unwrap();
        assert_eq!(again.mask, seg.mask);
    }
}

proptest! {
    #[test]
    fn kmeans_objective_never_increases(
        pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..200),
        k in 1usize..5,
        seed in 0u64..100,
    ) {
        let data: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a, b]).collect();
        let k = k.min(data.len());
        let km = kmeans(&data, k, seed, 100, 1e-6);
        prop_assert!(km.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}
