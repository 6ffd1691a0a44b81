use arbor_core::metrics::{error_stats, summarize};
use arbor_core::{ErrorStats, GeomMetrics, ScaleResult, TraitReport};
use serde::{Deserialize, Serialize};

use crate::tables::ThroughputReport;

/// QSM on an independent resampling of the ground-truth mesh.
pub const GT_RESAMPLE: &str = "gt-resample";
/// The fused, segmented depth-sensor cloud.
pub const SENSOR: &str = "sensor";
pub const BUILTIN_METHODS: [&str; 2] = [GT_RESAMPLE, SENSOR];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub dataset_seed: u64,
    pub trees: usize,
    pub voxel_size: f64,
    pub crate_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Ok,
    TraitUnavailable { reason: String },
    Failed { stage: String, message: String },
}

impl Status {
    pub fn failed(stage: &str, message: impl ToString) -> Self {
        Status::Failed {
            stage: stage.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpSummary {
    pub final_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inlier_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: String,
    pub status: Status,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icp: Option<IcpSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geom: Option<GeomMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traits: Option<TraitReport>,
}

impl MethodRecord {
    pub fn new(method: &str) -> Self {
        MethodRecord {
            method: method.into(),
            status: Status::Ok,
            points: 0,
            scale: None,
            icp: None,
            geom: None,
            traits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub tree_id: String,
    pub seed: u64,
    pub views: usize,
    /// Tree-level failure before any method could run.
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<TraitReport>,
    pub methods: Vec<MethodRecord>,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub trees: usize,
    pub failed: usize,
    pub trait_unavailable: usize,
    pub chamfer_l2: Option<MeanStd>,
    pub jsd: Option<MeanStd>,
    /// MAE in centimeters, MAPE in percent, over trees with a measured trunk.
    pub trunk_diameter_cm: Option<ErrorStats>,
    pub branch_count: Option<ErrorStats>,
    /// MAE in meters.
    pub tree_height: Option<ErrorStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub trees: Vec<TreeRecord>,
    pub methods: Vec<MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub throughput: Option<ThroughputReport>,
}

fn mean_std(v: &[f64]) -> Option<MeanStd> {
    if v.is_empty() {
        return None;
    }
    let (mean, std, _) = summarize(v);
    Some(MeanStd { mean, std })
}

fn stats(pairs: &[(f64, f64)]) -> Option<ErrorStats> {
    if pairs.is_empty() {
        return None;
    }
    let (est, gt): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    error_stats(&est, &gt).ok()
}

/// Per-method aggregates, in order of first appearance across the records.
pub fn aggregate(trees: &[TreeRecord]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for t in trees {
        for m in &t.methods {
            if !order.contains(&m.method.as_str()) {
                order.push(&m.method);
            }
        }
    }
    order
        .into_iter()
        .map(|name| {
            let mut s = MethodSummary {
                method: name.to_string(),
                trees: 0,
                failed: 0,
                trait_unavailable: 0,
                chamfer_l2: None,
                jsd: None,
                trunk_diameter_cm: None,
                branch_count: None,
                tree_height: None,
            };
            let (mut cd, mut jsd) = (Vec::new(), Vec::new());
            let (mut dia, mut br, mut h) = (Vec::new(), Vec::new(), Vec::new());
            for t in trees {
                let Some(m) = t.methods.iter().find(|m| m.method == name) else {
                    continue;
                };
                s.trees += 1;
                match m.status {
                    Status::Failed { .. } => s.failed += 1,
                    Status::TraitUnavailable { .. } => s.trait_unavailable += 1,
                    Status::Ok => {}
                }
                if let Some(g) = &m.geom {
                    cd.push(g.chamfer_l2);
                    jsd.push(g.jsd);
                }
                if let (Some(est), Some(gt)) = (&m.traits, &t.ground_truth) {
                    if let (Some(d), Some(dg)) = (est.trunk_diameter, gt.trunk_diameter) {
                        dia.push((100.0 * d, 100.0 * dg));
                    }
                    br.push((est.branch_count as f64, gt.branch_count as f64));
                    h.push((est.tree_height, gt.tree_height));
                }
            }
            s.chamfer_l2 = mean_std(&cd);
            s.jsd = mean_std(&jsd);
            s.trunk_diameter_cm = stats(&dia);
            s.branch_count = stats(&br);
            s.tree_height = stats(&h);
            s
        })
        .collect()
}
