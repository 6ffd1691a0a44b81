//! Implementation-independent reference computations checked against the kernels.

use arbor_core::kdtree::linear_nearest;
use arbor_core::metrics::{chamfer, percentile, ChamferKind};
use arbor_core::{
    apply_transform, chamfer_l2, downsample, error_stats, icp_align, jsd, unproject_indexed, voxelize, Cloud,
    CloudF32, Depth, IcpInit, IcpParams, Intrinsics, KdIndex, KdTree, Mat3, PointCloud, RigidTransform, Transform,
    Vec3, Vec3d,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Cloud {
    Cloud::new(
        (0..n)
            .map(|_| Vec3::new(rng.random::<f64>() * scale, rng.random::<f64>() * scale, rng.random::<f64>() * scale))
            .collect(),
    )
    .unwrap()
}

#[test]
fn kdtree_matches_linear_scan_on_1000_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..1000 {
        let n = rng.random_range(1..300);
        // coarse lattice coordinates make exact ties common
        let pts: Vec<Vec3d> = (0..n)
            .map(|_| {
                if inst % 2 == 0 {
                    Vec3::new(rng.random_range(0..6) as f64, rng.random_range(0..6) as f64, rng.random_range(0..3) as f64)
                } else {
                    Vec3::new(rng.random(), rng.random(), rng.random())
                }
            })
            .collect();
        let tree = KdTree::from_points(&pts);
        let q = Vec3::new(rng.random_range(-1.0..7.0), rng.random_range(-1.0..7.0), rng.random_range(-1.0..4.0));
        assert_eq!(tree.nearest(&q).unwrap(), linear_nearest(&pts, &q).unwrap(), "instance {inst}");
    }
}

#[test]
fn kdtree_1000_points_100_queries() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cloud = random_cloud(&mut rng, 1000, 1.0);
    let tree = KdIndex::new(&cloud);
    for _ in 0..100 {
        let q = Vec3::new(rng.random(), rng.random(), rng.random());
        assert_eq!(tree.nearest(&q).unwrap(), linear_nearest(cloud.points(), &q).unwrap());
        let mut brute: Vec<(f64, usize)> =
            cloud.points().iter().enumerate().map(|(i, p)| (p.distance_squared(&q), i)).collect();
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let knn = tree.knn(&q, 7);
        let want: Vec<(usize, f64)> = brute[..7].iter().map(|&(d2, i)| (i, d2.sqrt())).collect();
        assert_eq!(knn, want);
        let r = 0.15;
        let mut inside: Vec<usize> =
            brute.iter().filter(|(d2, _)| *d2 <= r * r).map(|&(_, i)| i).collect();
        inside.sort_unstable();
        assert_eq!(tree.within_radius(&q, r), inside);
        let (j, d2) = (brute[0].1, brute[0].0);
        let bounded = tree.nearest_within(&q, r * r);
        if d2 <= r * r {
            assert_eq!(bounded, Some((j, d2)));
        } else {
            assert_eq!(bounded, None);
        }
    }
}

#[test]
fn voxelize_conserves_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cloud = random_cloud(&mut rng, 10_000, 1.0);
    let grid = voxelize(&cloud, 0.1, Vec3::zeros()).unwrap();
    assert_eq!(grid.total(), 10_000);
    assert!(grid.occupied() <= 1000);
}

#[test]
fn downsample_size_matches_distinct_voxels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = random_cloud(&mut rng, 10_000, 0.4);
    let size = 0.01;
    let mut keys: Vec<(i64, i64, i64)> = cloud
        .points()
        .iter()
        .map(|p| ((p.x / size).floor() as i64, (p.y / size).floor() as i64, (p.z / size).floor() as i64))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let d = downsample(&cloud, size).unwrap();
    assert_eq!(d.len(), keys.len());
    assert!(d.len() <= cloud.len());
}

fn brute_chamfer(a: &Cloud, b: &Cloud) -> f64 {
    let side = |x: &Cloud, y: &Cloud| {
        let mut s = 0.0;
        for p in x.points() {
            let mut best = f64::INFINITY;
            for q in y.points() {
                let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
                best = best.min(d);
            }
            s += best;
        }
        s / x.len() as f64
    };
    (side(a, b) + side(b, a)) * 0.5
}

#[test]
fn chamfer_equals_brute_force_on_50_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let a = random_cloud(&mut rng, 200, 1.0);
        let b = random_cloud(&mut rng, 200, 1.0);
        assert_eq!(chamfer_l2(&a, &b).unwrap(), brute_chamfer(&a, &b));
        assert_eq!(chamfer_l2(&a, &b).unwrap(), chamfer_l2(&b, &a).unwrap());
    }
}

/// Dense-array histogram JSD, independent of the sparse grid code.
fn histogram_jsd(a: &Cloud, b: &Cloud, size: f64) -> f64 {
    let all: Vec<&Vec3d> = a.points().iter().chain(b.points()).collect();
    let min = |k: usize| all.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
    let max = |k: usize| all.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
    let lo = [min(0), min(1), min(2)];
    let dims: Vec<usize> = (0..3).map(|k| ((max(k) - lo[k]) / size).floor() as usize + 1).collect();
    let idx = |p: &Vec3d| {
        let i: Vec<usize> = (0..3).map(|k| ((p[k] - lo[k]) / size).floor() as usize).collect();
        (i[2] * dims[1] + i[1]) * dims[0] + i[0]
    };
    let mut ha = vec![0.0; dims.iter().product()];
    let mut hb = ha.clone();
    a.points().iter().for_each(|p| ha[idx(p)] += 1.0);
    b.points().iter().for_each(|p| hb[idx(p)] += 1.0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (ca, cb) in ha.iter().zip(&hb) {
        let (p, q) = (ca / na, cb / nb);
        let m = 0.5 * (p + q);
        if p > 0.0 {
            kl_p += p * (p / m).ln();
        }
        if q > 0.0 {
            kl_q += q * (q / m).ln();
        }
    }
    0.5 * kl_p + 0.5 * kl_q
}

#[test]
fn jsd_matches_histogram_oracle_on_20_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        // 500 points on a 10^3 grid
        let a = random_cloud(&mut rng, 500, 0.999);
        let b = Cloud::new(
            random_cloud(&mut rng, 500, 0.999)
                .points()
                .iter()
                .map(|p| Vec3::new(p.x * p.x, p.y, p.z.sqrt()))
                .collect(),
        )
        .unwrap();
        let got = jsd(&a, &b, 0.1).unwrap();
        let want = histogram_jsd(&a, &b, 0.1);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&got));
        assert_eq!(jsd(&a, &b, 0.1).unwrap(), jsd(&b, &a, 0.1).unwrap());
    }
}

#[test]
fn error_stats_match_naive_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let gt: Vec<f64> = (0..30).map(|_| rng.random_range(2.0..9.0)).collect();
    let est: Vec<f64> = gt.iter().map(|g| g + rng.random_range(-1.5..1.5)).collect();
    let s = error_stats(&est, &gt).unwrap();
    let abs: Vec<f64> = est.iter().zip(&gt).map(|(e, g)| (e - g).abs()).collect();
    let pct: Vec<f64> = est.iter().zip(&gt).map(|(e, g)| 100.0 * (e - g).abs() / g).collect();
    let check = |v: &[f64], mean: f64, std: f64, p75: f64| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // rank 0.75 * 29 = 21.75
        let q = sorted[21] + 0.75 * (sorted[22] - sorted[21]);
        assert!((mean - m).abs() < 1e-12 && (std - sd).abs() < 1e-12 && (p75 - q).abs() < 1e-12);
    };
    check(&abs, s.mae_mean, s.mae_std, s.mae_p75);
    check(&pct, s.mape_mean, s.mape_std, s.mape_p75);
    assert_eq!(percentile(&abs, 75.0), s.mae_p75);
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Mat3<f64> {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Mat3::from_axis_angle(&axis, rng.random_range(-max_angle..max_angle))
}

fn bumpy_surface(n: usize, rng: &mut ChaCha8Rng) -> Cloud {
    Cloud::new(
        (0..n)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                Vec3::new(u, v, 0.2 * (3.0 * u).sin() * (2.0 * v).cos() + 0.1 * u * v)
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn icp_is_equivariant_under_rigid_motions() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let src = bumpy_surface(3000, &mut rng);
    let t = Transform::new(random_rotation(&mut rng, 0.15), Vec3::new(0.03, -0.02, 0.01)).unwrap();
    let tgt = apply_transform(&src, &t);
    let params = IcpParams {
        init: IcpInit::Identity,
        max_corr_dist: Some(0.5),
        ..Default::default()
    };
    let base = icp_align(&src, &tgt, &params).unwrap();
    let g = Transform::new(random_rotation(&mut rng, 3.0), Vec3::new(1.0, -2.0, 0.5)).unwrap();
    let moved = icp_align(&apply_transform(&src, &g), &apply_transform(&tgt, &g), &params).unwrap();
    let expected = g.compose(&base.transform).compose(&g.inverse());
    let (dr, dt) = moved.transform.difference(&expected);
    assert!(dr < 1e-6 && dt < 1e-6, "dr={dr} dt={dt}");
    assert!(moved.transform.rotation().is_rotation());
}

#[test]
fn icp_rms_final_not_above_initial() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let src = bumpy_surface(2000, &mut rng);
    let t = Transform::new(random_rotation(&mut rng, 0.2), Vec3::new(0.05, 0.0, -0.03)).unwrap();
    let tgt = Cloud::new(
        apply_transform(&bumpy_surface(2000, &mut rng), &t).points().to_vec(),
    )
    .unwrap();
    let r = icp_align(&src, &tgt, &IcpParams { init: IcpInit::Centroid, ..Default::default() }).unwrap();
    assert!(r.final_rms() <= r.rms_history[0]);
    assert_eq!(r.iterations, r.rms_history.len());
}

#[test]
fn single_precision_pipeline_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let src64 = bumpy_surface(1500, &mut rng);
    let src: CloudF32 = src64.cast();
    let t = RigidTransform::<f32>::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), 0.1, Vec3::new(0.02, 0.01, 0.0));
    let tgt = apply_transform(&src, &t);
    let r = icp_align(
        &src,
        &tgt,
        &IcpParams { init: IcpInit::Identity, max_corr_dist: Some(0.5f32), rms_delta: 1e-7, ..Default::default() },
    )
    .unwrap();
    let (dr, dt) = r.transform.difference(&t);
    assert!(dr < 1e-3 && dt < 1e-3);
    let c = chamfer(&src, &tgt, ChamferKind::Distance).unwrap();
    assert!(c >= 0.0);
    assert!(jsd(&src, &src, 0.05f32).unwrap() == 0.0);
}

proptest! {
    #[test]
    fn unproject_reproject_round_trip(
        fx in 200.0f64..2000.0, fy in 200.0f64..2000.0,
        w in 4usize..40, h in 4usize..40,
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, angle in -3.0f64..3.0,
        tx in -5.0f64..5.0, seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = Intrinsics::new(fx, fy, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h).unwrap();
        let pose = Transform::from_axis_angle(&Vec3::new(ax, ay, 1.0), angle, Vec3::new(tx, -tx, 1.0));
        let depth: Vec<f64> = (0..w * h)
            .map(|_| if rng.random::<f64>() < 0.2 { f64::NAN } else { rng.random_range(0.3..30.0) })
            .collect();
        let dm = Depth::new(w, h, depth).unwrap();
        let (cloud, px) = unproject_indexed(&dm, &k, &pose, |_| true).unwrap();
        prop_assert_eq!(cloud.len(), dm.valid_count());
        for (p, &i) in cloud.points().iter().zip(&px) {
            let (u, v, z) = k.project(&pose, p).unwrap();
            prop_assert!((u - (i % w) as f64).abs() < 1e-6);
            prop_assert!((v - (i / w) as f64).abs() < 1e-6);
            prop_assert!((z - dm.at_index(i).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_then_inverse_is_identity(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in -3.1f64..3.1,
        tx in -10.0f64..10.0, ty in -10.0f64..10.0, seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Transform::from_axis_angle(&Vec3::new(ax, ay, az), angle, Vec3::new(tx, ty, 0.3));
        let cloud = random_cloud(&mut rng, 50, 4.0);
        let back = apply_transform(&apply_transform(&cloud, &t), &t.inverse());
        for (a, b) in back.points().iter().zip(cloud.points()) {
            prop_assert!(a.distance(b) < 1e-9);
        }
        prop_assert!(t.rotation().is_rotation());
    }

    #[test]
    fn chamfer_rigid_invariance(seed in 0u64..500, angle in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cloud(&mut rng, 60, 1.0);
        let b = random_cloud(&mut rng, 80, 1.0);
        let t = Transform::from_axis_angle(&Vec3::new(0.3, 1.0, -0.2), angle, Vec3::new(0.5, 0.1, -0.4));
        let d0 = chamfer_l2(&a, &b).unwrap();
        let d1 = chamfer_l2(&apply_transform(&a, &t), &apply_transform(&b, &t)).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn voxelize_always_conserves(seed in 0u64..500, size in 0.001f64..2.0, n in 1usize..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_cloud(&mut rng, n, 3.0);
        let origin = Vec3::new(-1.0, 0.5, 0.2);
        prop_assert_eq!(voxelize(&c, size, origin).unwrap().total(), n);
        prop_assert!(downsample(&c, size).unwrap().len() <= n);
    }
}

#[test]
fn point_cloud_alias_is_generic_instantiation() {
    let c: PointCloud<f64> = Cloud::empty();
    assert!(c.is_empty());
}
