use std::path::{Path, PathBuf};

use arbor_core::{IcpParams, Intrinsics};
use arbor_qsm::QsmParams;
use arbor_seg::{KeepPolicy, SegConfig};
use arbor_sim::{zed_intrinsics, NoiseSpec, RowSpec, TreeParamRanges, TreeParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::DegradeSpec;
use crate::tables::ThroughputInput;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config {path} does not parse: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub trees: usize,
    pub seed: u64,
    pub base: TreeParams,
    pub ranges: TreeParamRanges,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            trees: 30,
            seed: 2024,
            base: TreeParams::default(),
            ranges: TreeParamRanges::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureSpec {
    pub intrinsics: Intrinsics,
    /// Pass geometry; `n_frames` is replaced by the per-tree view count.
    pub row: RowSpec,
    /// Inclusive range the per-tree view count is drawn from.
    pub views: [usize; 2],
    /// Neighbour trees stand this far along the row on either side; 0 disables them.
    pub neighbour_spacing: f64,
    pub ground: bool,
    pub noise: NoiseSpec,
    /// Voxel size for the fused sensor cloud, meters.
    pub fuse_voxel: f64,
}

impl Default for CaptureSpec {
    fn default() -> Self {
        CaptureSpec {
            intrinsics: zed_intrinsics(),
            row: RowSpec::default(),
            views: [15, 30],
            neighbour_spacing: 1.5,
            ground: true,
            noise: NoiseSpec::default(),
            fuse_voxel: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSpec {
    /// JSD voxel size, meters.
    pub voxel_size: f64,
    /// Points sampled from every ground-truth mesh.
    pub gt_points: usize,
    /// Both clouds are downsampled to this voxel size before ICP.
    pub icp_voxel: f64,
    pub icp: IcpParams<f64>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            voxel_size: 0.05,
            gt_points: 100_000,
            icp_voxel: 0.01,
            icp: IcpParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSource {
    /// Degraded ground truth; the seed is re-derived per tree.
    Oracle { spec: DegradeSpec },
    /// Drop directory holding `<tree_id>.obj` or `<tree_id>.ply`.
    External { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: BackendSource,
}

/// Settings that change where and how fast a run happens but never its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionSpec {
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Keep the rendered depth and mono images after segmentation.
    pub keep_frames: bool,
}

impl Default for ExecutionSpec {
    fn default() -> Self {
        ExecutionSpec {
            output_dir: None,
            workers: 0,
            keep_frames: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub capture: CaptureSpec,
    pub segmentation: SegConfig,
    pub qsm: QsmParams,
    pub metrics: MetricSpec,
    pub backends: Vec<BackendSpec>,
    pub throughput: Option<ThroughputInput>,
    pub execution: ExecutionSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            capture: CaptureSpec::default(),
            segmentation: SegConfig {
                keep: KeepPolicy::NearestRowPosition { along: 0.0 },
                ..SegConfig::default()
            },
            qsm: QsmParams::default(),
            metrics: MetricSpec::default(),
            backends: vec![BackendSpec {
                name: "oracle".into(),
                source: BackendSource::Oracle {
                    spec: DegradeSpec {
                        noise_sigma: 0.002,
                        strip_scale: true,
                        seed: 7,
                        ..DegradeSpec::default()
                    },
                },
            }],
            throughput: None,
            execution: ExecutionSpec::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: shown.clone(), source })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: shown, source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.dataset;
        if d.trees == 0 {
            return Err(invalid("dataset.trees must be at least 1"));
        }
        d.base.validate().map_err(|e| invalid(format!("dataset.base: {e}")))?;
        d.ranges.validate().map_err(|e| invalid(format!("dataset.ranges: {e}")))?;
        let c = &self.capture;
        c.intrinsics.validate().map_err(|e| invalid(format!("capture.intrinsics: {e}")))?;
        c.noise.validate().map_err(|e| invalid(format!("capture.noise: {e}")))?;
        RowSpec { n_frames: 1, ..c.row.clone() }
            .validate()
            .map_err(|e| invalid(format!("capture.row: {e}")))?;
        if c.views[0] == 0 || c.views[0] > c.views[1] {
            return Err(invalid(format!("capture.views {:?} is not a range", c.views)));
        }
        if !(c.neighbour_spacing >= 0.0 && c.fuse_voxel > 0.0) {
            return Err(invalid("capture.neighbour_spacing must be >= 0 and fuse_voxel > 0"));
        }
        let s = &self.segmentation;
        if !(s.max_range > 0.0 && (0.0..1.0).contains(&s.tau_sky) && s.k >= 1 && s.merge_radius >= 0.0 && s.max_fit_pixels > 0) {
            return Err(invalid("segmentation parameters out of range"));
        }
        self.qsm.validate().map_err(|e| invalid(format!("qsm: {e}")))?;
        let m = &self.metrics;
        if !(m.voxel_size > 0.0 && m.icp_voxel > 0.0 && m.gt_points > 0 && m.icp.max_iter > 0 && m.icp.rms_delta >= 0.0) {
            return Err(invalid("metrics parameters out of range"));
        }
        let mut names = std::collections::BTreeSet::new();
        for b in &self.backends {
            if b.name.is_empty() || !names.insert(b.name.as_str()) || crate::report::BUILTIN_METHODS.contains(&b.name.as_str()) {
                return Err(invalid(format!("backend name {:?} is empty, repeated or reserved", b.name)));
            }
            match &b.source {
                BackendSource::Oracle { spec } => {
                    spec.validate().map_err(|e| invalid(format!("backend {}: {e}", b.name)))?;
                }
                BackendSource::External { dir } => {
                    if !dir.is_dir() {
                        return Err(invalid(format!("backend {}: {} is not a directory", b.name, dir.display())));
                    }
                }
            }
        }
        if let Some(t) = &self.throughput {
            t.ratio().map_err(|e| invalid(format!("throughput: {e}")))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except the execution settings.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            execution: ExecutionSpec::default(),
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
