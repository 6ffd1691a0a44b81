//! Experiment orchestration for orchard-tree reconstruction: reconstruction
//! backends (external drops and a ground-truth oracle), the end-to-end
//! per-tree pipeline, evaluation reports and the tables built from them.

pub mod backend;
pub mod config;
pub mod report;
pub mod run;
pub mod tables;

pub use backend::{
    find_backend_file, ingest_external, oracle_backend, oracle_from_mesh, BackendError, Crop, DegradeSpec, ExpectedKind, ReconRequest, ReconResult,
};
pub use config::{BackendSource, BackendSpec, ConfigError, ExperimentConfig};
pub use report::{aggregate, EvalReport, MethodRecord, MethodSummary, Status, TreeRecord};
pub use run::{run_pipeline, PipelineError, RunOutput, Timings};
pub use tables::{make_tables, Tables, ThroughputInput, ThroughputReport};
