//! Reading and writing on-disk artifacts.
//!
//! | artifact | format |
//! |---|---|
//! | point clouds | PLY, ASCII or binary little-endian |
//! | meshes | OBJ (`v`, `vt`, `vn`, `f` subset) |
//! | depth sequences | TOML manifest + 16-bit PNG depth |
//! | segmentation | whitespace-separated label file |
//! | model database | directory tree + `index.toml` |
//! | layouts | JSON [`LayoutDocument`] |
//! | loss inputs | PNG or raw float maps ([`maps`]) |

mod database;
mod frames;
mod labels;
mod layout_doc;
pub mod maps;
mod obj;
mod ply;

pub use database::{ModelDatabase, ModelEntry, UpAxis, DATABASE_INDEX};
pub use frames::{
    read_frame_manifest, read_frame_manifest_with, write_frame_sequence, DepthFrame, Intrinsics,
    DEFAULT_DEPTH_SCALE,
};
pub use labels::{read_labels, write_labels, Instance, SegmentedScene};
pub use layout_doc::{
    LAYOUT_FORMAT,
    read_layout, write_layout, EnvelopeSummary, LayoutDocument, OutputMode, PassThrough,
    PlacementRecord, Provenance,
};
pub use obj::{read_mesh, write_mesh, MeshFile};
pub use ply::{read_point_cloud, write_point_cloud, write_point_cloud_with, PlyEncoding};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("frame {frame}: quaternion norm {norm} cannot be normalized")]
    NonNormalizedQuaternion { frame: usize, norm: f64 },
    #[error("{path}: line {line} references point {index} but the cloud has {len} points")]
    IndexOutOfRange {
        path: PathBuf,
        line: usize,
        index: usize,
        len: usize,
    },
    #[error("{path}: unsupported feature: {what}")]
    Unsupported { path: PathBuf, what: String },
    #[error("{path}: image error: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl FormatError {
    pub(crate) fn parse(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            FormatError::MissingFile(path.to_path_buf())
        } else {
            FormatError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}
