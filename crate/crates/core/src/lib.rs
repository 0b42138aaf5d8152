//! Point cloud reconstruction from multi-view silhouettes by 2D projection
//! matching.
//!
//! Silhouettes are discretized into irregular 2D point sets
//! ([`sampling`]); a 3D point cloud is projected into every view
//! ([`geometry`]) and pushed to match those sets under a two-sided Chamfer
//! loss ([`loss`]), optimized directly with Adam ([`optimize`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod nn_index;
pub mod optimize;
pub mod pgm;
mod real;
pub mod sampling;
pub mod silhouette;
pub mod synth;

pub use error::{Error, Result};
pub use real::Real;

pub type PointCloud = geometry::PointCloud3<f64>;
pub type PointSet = geometry::PointSet2<f64>;
pub type Camera = geometry::Camera<f64>;
pub type View = geometry::View<f64>;
pub type Silhouette = silhouette::Silhouette<f64>;
pub type Index2D = nn_index::Index2<f64>;
pub type LossReport = loss::LossReport<f64>;
pub type SupervisedView = loss::SupervisedView<f64>;
pub type OptimTrace = optimize::OptimTrace<f64>;
pub type SceneSpec = synth::SceneSpec<f64>;
pub type VoxelGrid = eval::VoxelGrid<f64>;

pub type PointCloudF32 = geometry::PointCloud3<f32>;
pub type SilhouetteF32 = silhouette::Silhouette<f32>;
