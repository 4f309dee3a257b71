//! Indoor room layout from RGB-D scans.
//!
//! The crate turns posed depth frames or labeled point clouds into a room
//! layout: depth frames are fused into a truncated signed distance volume
//! and converted to a colored point cloud ([`tsdf`]), the floor and walls of a
//! segmented scene give the room envelope ([`envelope`]), catalog furniture
//! models are fitted against segmented objects by a chamfer-driven rotation
//! sweep ([`registration`]), and interior constraints keep the placed models
//! on the floor, inside the walls and apart from each other ([`constraints`]).
//!
//! [`losses`] holds standalone evaluators for the normal-derivative and depth
//! reconstruction losses, and [`synth`] generates analytic rooms used as test
//! oracles. [`pipeline`] chains the layout stages end to end.

pub mod constraints;
pub mod envelope;
pub mod geom;
pub mod io;
pub mod losses;
pub mod pipeline;
pub mod registration;
pub mod synth;
pub mod tsdf;

pub use geom::{GeomError, PointCloud, RigidTransform};

/// Tool version recorded in run manifests and layout provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
