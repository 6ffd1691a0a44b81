//! Structural traits from tree point clouds: robust height, a geodesic
//! level-set skeleton, trunk diameter from a circle fit on a trunk slice, and
//! first-order branch count.

pub mod circle;
pub mod height;
pub mod params;
pub mod skeleton;
pub mod traits;
pub mod trunk;

pub use circle::{fit_circle, CircleFit};
pub use height::{remove_outliers, tree_height, tree_height_percentiles};
pub use params::QsmParams;
pub use skeleton::{branch_roots, count_branches, extract_skeleton};
pub use traits::estimate_traits;
pub use trunk::{trunk_diameter, TrunkMeasurement};

#[derive(Debug, thiserror::Error)]
pub enum QsmError {
    #[error(transparent)]
    Core(#[from] arbor_core::Error),
    #[error("k-NN graph is disconnected; component sizes {sizes:?}")]
    Disconnected { sizes: Vec<usize> },
    #[error("trait unavailable: {reason}")]
    TraitUnavailable { reason: String },
}

pub type QsmResult<T> = std::result::Result<T, QsmError>;
