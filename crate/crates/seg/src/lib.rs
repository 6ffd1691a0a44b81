//! Background removal for row-traversal RGB-D frames: a range cut on metric
//! depth, a sky mask from monocular relative depth, a world-height ground cut,
//! and k-means clustering to isolate the target tree.

pub mod bundle;
pub mod cascade;
pub mod kmeans;
pub mod mask;

pub use bundle::{read_frames, FrameBundle};
pub use cascade::{
    cluster_filter, distance_filter, ground_mask, segment_tree, sky_mask, ClusterOutcome, ClusterStatus,
    KeepPolicy, SegConfig, SegError, Segmentation,
};
pub use kmeans::{kmeans, KMeans};
pub use mask::{write_mask_outputs, SegMask, Stage, StageCounts};
