//! Model retrieval and placement: candidates are drawn from the catalog by
//! category, scaled to the segmented target, swept about the floor normal
//! and scored by chamfer distance.

mod candidate;
mod evaluate;
mod fit;

use thiserror::Error;

use crate::geom::GeomError;
use crate::io::FormatError;

pub use candidate::{retrieve_candidates, sample_surface, CandidateModel, DEFAULT_SAMPLES};
pub use evaluate::{evaluate_scene, fit_best, EvalOptions, InstanceResult, Method, SceneReport, SkippedInstance};
pub use fit::{baseline_placement, fit_placement, sweep_scores, FitOptions, Placement, ScaleMode, SweepEntry};

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("no models of category {0:?} in the database")]
    UnknownCategory(String),
    #[error("angle step {0}° does not divide 360")]
    InvalidAngleStep(u32),
    #[error("model {0} has no surface area")]
    EmptyMesh(String),
}

/// FNV-1a, used to derive stable per-model and per-instance seeds.
pub(crate) fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn derive_seed(seed: u64, tag: &[u8]) -> u64 {
    stable_hash(tag) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
