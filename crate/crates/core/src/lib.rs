//! Geometry kernels for orchard-tree reconstruction and evaluation.
//!
//! The numeric core (vectors, point clouds, kd-tree, voxel grids, ICP, Chamfer
//! and JSD metrics, scale retrieval) is generic over [`Real`], so the same code
//! runs in `f32` or `f64`. The aliases below name the `f64` instantiations used by
//! the rest of the workspace.

pub mod camera;
pub mod cloud;
pub mod error;
pub mod io;
pub mod kdtree;
pub mod linalg;
pub mod mesh;
pub mod metrics;
mod real;
pub mod registration;
pub mod scale;
pub mod skeleton;
pub mod transform;
pub mod voxel;

pub use camera::{unproject, unproject_indexed, unproject_pixel, CameraIntrinsics, DepthMap};
pub use cloud::{PointCloud, Rgb};
pub use error::{Error, Result};
pub use kdtree::KdTree;
pub use linalg::{Mat3, Svd3, Vec3};
pub use mesh::TriMesh;
pub use metrics::{chamfer_l2, error_stats, jsd, ErrorStats, GeomMetrics};
pub use real::Real;
pub use registration::{icp_align, IcpInit, IcpParams, IcpReport};
pub use scale::{apply_scale, scale_factor, ScaleResult};
pub use skeleton::{SkeletonGraph, SkeletonNode, TraitDiagnostics, TraitReport};
pub use transform::{apply_transform, Pose, RigidTransform};
pub use voxel::{downsample, voxelize, VoxelGrid, VoxelKey};

pub type Vec3d = Vec3<f64>;
pub type Vec3f = Vec3<f32>;
pub type Mat3d = Mat3<f64>;
pub type Mat3f = Mat3<f32>;
pub type Cloud = PointCloud<f64>;
pub type CloudF32 = PointCloud<f32>;
pub type Transform = RigidTransform<f64>;
pub type TransformF32 = RigidTransform<f32>;
pub type Intrinsics = CameraIntrinsics<f64>;
pub type Depth = DepthMap<f64>;
pub type Mesh = TriMesh<f64>;
pub type KdIndex = KdTree<f64>;
pub type Grid = VoxelGrid<f64>;
