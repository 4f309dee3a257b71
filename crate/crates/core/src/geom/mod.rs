//! Geometry kernels shared by every stage: point clouds, rigid transforms,
//! principal axes, nearest-neighbor search, chamfer distance, oriented boxes
//! and planar polygons.

mod chamfer;
mod cloud;
mod kdtree;
mod mesh;
mod obb;
mod pca;
pub mod polygon;
mod transform;

pub use chamfer::{chamfer_distance, chamfer_distance_with, one_sided_chamfer, ChamferMetric};
pub use cloud::PointCloud;
pub use kdtree::{squared_distance, NnIndex};
pub use mesh::TriangleMesh;
pub use obb::{obb_overlap, Obb};
pub use pca::{compute_pca, principal_axes_2d, PrincipalAxes, PrincipalAxes2};
pub use transform::RigidTransform;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
}
