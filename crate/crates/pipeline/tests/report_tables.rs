use arbor_core::metrics::percentile;
use arbor_core::{GeomMetrics, TraitDiagnostics, TraitReport};
use arbor_pipeline::config::{BackendSource, BackendSpec, ExperimentConfig};
use arbor_pipeline::report::{Provenance, SENSOR};
use arbor_pipeline::{aggregate, make_tables, EvalReport, MethodRecord, Status, ThroughputInput, TreeRecord};
use proptest::prelude::*;

fn traits(d: Option<f64>, branches: usize, h: f64) -> TraitReport {
    TraitReport {
        trunk_diameter: d,
        branch_count: branches,
        tree_height: h,
        diagnostics: TraitDiagnostics::default(),
    }
}

fn method(name: &str, cd: f64, est: Option<TraitReport>) -> MethodRecord {
    let status = match &est {
        Some(t) if t.trunk_diameter.is_none() => Status::TraitUnavailable { reason: "slice too sparse".into() },
        _ => Status::Ok,
    };
    MethodRecord {
        status,
        points: 1000,
        geom: Some(GeomMetrics { chamfer_l2: cd, jsd: cd / 2.0, n_source: 1000, n_target: 1000, voxel_size: 0.05 }),
        traits: est,
        ..MethodRecord::new(name)
    }
}

fn tree(i: usize, gt: TraitReport, methods: Vec<MethodRecord>) -> TreeRecord {
    TreeRecord {
        tree_id: format!("tree_{i:03}"),
        seed: i as u64,
        views: 20,
        status: Status::Ok,
        ground_truth: Some(gt),
        methods,
    }
}

fn report(trees: Vec<TreeRecord>) -> EvalReport {
    EvalReport {
        provenance: Provenance {
            config_hash: "0".repeat(64),
            dataset_seed: 1,
            trees: trees.len(),
            voxel_size: 0.05,
            crate_version: "test".into(),
        },
        methods: aggregate(&trees),
        trees,
        throughput: None,
    }
}

#[test]
fn single_method_single_tree_has_zero_std() {
    let r = report(vec![tree(0, traits(Some(0.05), 20, 3.0), vec![method("m", 0.02, Some(traits(Some(0.055), 18, 3.1)))])]);
    let t = make_tables(&r).unwrap();
    assert_eq!(t.geometry_csv, "method,cd_mean,cd_std,jsd_mean,jsd_std\nm,0.0200,0.0000,0.0100,0.0000\n");
    assert_eq!(
        t.diameter_csv,
        "method,mae_mean,mae_std,mae_p75,mape_mean,mape_std,mape_p75\nm,0.50,0.00,0.50,10.00,0.00,10.00\n"
    );
    assert_eq!(t.branches_csv.lines().nth(1).unwrap(), "m,2.00,0.00,2.00,10.00,0.00,10.00");
    assert_eq!(t.geometry_md.lines().count(), 3);
    assert!(t.geometry_md.starts_with("| method | cd_mean |"));
}

#[test]
fn all_unavailable_method_renders_dashes() {
    let trees = (0..3)
        .map(|i| {
            tree(
                i,
                traits(Some(0.05), 20, 3.0),
                vec![method("good", 0.02, Some(traits(Some(0.05), 20, 3.0))), method("zed", 0.05, Some(traits(None, 12, 2.8)))],
            )
        })
        .collect();
    let r = report(trees);
    let zed = &r.methods[1];
    assert_eq!((zed.trait_unavailable, zed.failed), (3, 0));
    let t = make_tables(&r).unwrap();
    assert_eq!(t.diameter_csv.lines().nth(2).unwrap(), "zed,--,--,--,--,--,--");
    assert!(t.diameter_md.contains("| zed | -- | -- | -- | -- | -- | -- |"));
    assert!(t.diameter_csv.lines().nth(1).unwrap().starts_with("good,0.00,"));
    // branch counts are still reported for the unavailable method
    assert!(t.branches_csv.lines().nth(2).unwrap().starts_with("zed,8.00,"));
}

#[test]
fn failed_methods_count_but_contribute_nothing() {
    let failed = MethodRecord { status: Status::failed("ingest", "missing"), ..MethodRecord::new("ext") };
    let r = report(vec![tree(0, traits(Some(0.05), 20, 3.0), vec![failed])]);
    assert_eq!(r.methods[0].failed, 1);
    let t = make_tables(&r).unwrap();
    assert_eq!(t.geometry_csv.lines().nth(1).unwrap(), "ext,--,--,--,--");
}

#[test]
fn empty_report_is_rejected() {
    assert!(make_tables(&report(Vec::new())).is_err());
}

#[test]
fn throughput_ratio_is_exact() {
    let r = ThroughputInput { reference_hours: 3.0, robot_seconds: 30.0, trees: 6 }.ratio().unwrap();
    assert_eq!(r.ratio, 360.0);
    assert_eq!(r.reference_seconds_per_tree, 1800.0);
    assert_eq!(r.robot_seconds_per_tree, 5.0);
    assert!(ThroughputInput { reference_hours: 3.0, robot_seconds: 0.0, trees: 6 }.ratio().is_err());
    assert!(ThroughputInput { reference_hours: 3.0, robot_seconds: 30.0, trees: 0 }.ratio().is_err());
}

#[test]
fn report_json_round_trips() {
    let r = report(vec![tree(0, traits(Some(0.05), 20, 3.0), vec![method("m", 0.02, Some(traits(None, 18, 3.1)))])]);
    let text = serde_json::to_string(&r).unwrap();
    assert!(text.contains("\"state\":\"trait_unavailable\""));
    assert_eq!(serde_json::from_str::<EvalReport>(&text).unwrap(), r);
}

#[test]
fn config_hash_ignores_execution_settings() {
    let a = ExperimentConfig::default();
    let mut b = a.clone();
    b.execution.workers = 7;
    b.execution.output_dir = Some("/elsewhere".into());
    b.execution.keep_frames = false;
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let mut c = a.clone();
    c.dataset.seed += 1;
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn config_loads_partial_json_and_rejects_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    std::fs::write(&p, r#"{"dataset": {"trees": 3}, "metrics": {"icp": {"max_iter": 50}}}"#).unwrap();
    let cfg = ExperimentConfig::load(&p).unwrap();
    assert_eq!(cfg.dataset.trees, 3);
    assert_eq!(cfg.dataset.seed, 2024);
    assert_eq!(cfg.metrics.icp.max_iter, 50);
    assert_eq!(cfg.metrics.icp.rms_delta, 1e-7);

    let mut bad = ExperimentConfig::default();
    bad.capture.views = [30, 15];
    assert!(bad.validate().is_err());
    let mut reserved = ExperimentConfig::default();
    reserved.backends.push(BackendSpec {
        name: SENSOR.into(),
        source: BackendSource::Oracle { spec: Default::default() },
    });
    assert!(reserved.validate().is_err());
    let mut missing = ExperimentConfig::default();
    missing.backends[0].source = BackendSource::External { dir: dir.path().join("nope") };
    assert!(missing.validate().is_err());
    std::fs::write(&p, "{ not json").unwrap();
    assert!(matches!(ExperimentConfig::load(&p), Err(arbor_pipeline::ConfigError::Parse { .. })));
}

/// Recomputes one method's trunk-diameter statistics straight from the records.
fn naive_diameter_stats(r: &EvalReport, name: &str) -> Option<[f64; 6]> {
    let mut abs = Vec::new();
    let mut pct = Vec::new();
    for t in &r.trees {
        let gt = t.ground_truth.as_ref()?.trunk_diameter;
        let est = t.methods.iter().find(|m| m.method == name).and_then(|m| m.traits.as_ref()).and_then(|x| x.trunk_diameter);
        if let (Some(e), Some(g)) = (est, gt) {
            abs.push((100.0 * e - 100.0 * g).abs());
            pct.push(100.0 * (e - g).abs() / g);
        }
    }
    if abs.is_empty() {
        return None;
    }
    let ms = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt())
    };
    let (am, asd) = ms(&abs);
    let (pm, psd) = ms(&pct);
    Some([am, asd, percentile(&abs, 75.0), pm, psd, percentile(&pct, 75.0)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregates_match_recomputation(
        rows in prop::collection::vec((0.03f64..0.08, 0.9f64..1.1, 0.0f64..0.05, 5usize..30, prop::bool::weighted(0.8)), 1..12)
    ) {
        let trees: Vec<TreeRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(d, ratio, cd, b, ok))| {
                let est = traits(ok.then_some(d * ratio), b + i % 3, 3.0);
                tree(i, traits(Some(d), b, 3.0), vec![method("m", cd, Some(est))])
            })
            .collect();
        let r = report(trees);
        let s = &r.methods[0];
        let cds: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mean = cds.iter().sum::<f64>() / cds.len() as f64;
        prop_assert!((s.chamfer_l2.unwrap().mean - mean).abs() < 1e-12);
        let naive = naive_diameter_stats(&r, "m");
        match (&s.trunk_diameter_cm, naive) {
            (Some(e), Some(n)) => {
                let got = [e.mae_mean, e.mae_std, e.mae_p75, e.mape_mean, e.mape_std, e.mape_p75];
                for (g, w) in got.iter().zip(n) {
                    prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{got:?} vs {n:?}");
                }
            }
            (None, None) => {}
            (a, b) => prop_assert!(false, "mismatch {a:?} {b:?}"),
        }
        prop_assert_eq!(s.trait_unavailable, rows.iter().filter(|r| !r.4).count());
        prop_assert!(make_tables(&r).is_ok());
    }
}
