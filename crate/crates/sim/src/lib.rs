//! Synthetic data for orchard-row experiments: seeded tree generation, surface
//! sampling, camera trajectories along a row, z-buffer depth rendering and a
//! stereo-like depth degradation model.

pub mod capture;
pub mod frames;
pub mod noise;
pub mod params;
pub mod render;
pub mod rng;
pub mod row;
pub mod sample;
pub mod sweep;
pub mod tree;

pub use capture::{capture_frame, capture_row, Capture};
pub use frames::{write_frame_bundle, FrameFiles};
pub use noise::{degrade_depth, NoiseSpec};
pub use params::{TreeParamRanges, TreeParams};
pub use render::{
    mono_from_depth, mono_value, render_depth, render_mono_reldepth, render_scene, GroundPlane, Render, Scene,
    LABEL_BACKGROUND, LABEL_FIRST_MESH, LABEL_GROUND,
};
pub use row::{plan_trajectory, sample_view_count, zed_intrinsics, AimPolicy, RowSpec};
pub use sample::sample_surface;
pub use tree::{generate_tree, ground_truth_traits, write_tree, TreeModel};
