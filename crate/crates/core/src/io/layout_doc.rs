use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes, FormatError};

pub const LAYOUT_FORMAT: &str = "roomfit-layout/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Every furniture instance is replaced by a placed model.
    Virtual,
    /// Selected instances are replaced; the rest stay as scanned points.
    Hybrid,
}

/// Room envelope as stored in a layout. Contour vertices are in floor-frame
/// coordinates `((p − origin)·f1, (p − origin)·f2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub origin: [f64; 3],
    pub f1: [f64; 3],
    pub f2: [f64; 3],
    pub normal: [f64; 3],
    pub contour: Vec<[f64; 2]>,
    pub area: f64,
    pub dims: [f64; 2],
    pub height: f64,
    pub volume: f64,
}

/// A placed model. World position of a model point `p` (canonical z-up
/// frame) is `translation + F·Rz(rotation_deg)·S·(p − pivot)`, where `F` maps
/// (x, y, z) to the floor frame (f1, f2, normal) and `S` scales by `scale`
/// along the model's in-plane principal axes (at `scale_axis_deg` in the
/// model's xy plane) and its up axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub instance_id: u32,
    pub model_id: String,
    pub category: String,
    pub scale: [f64; 3],
    pub rotation_deg: f64,
    pub translation: [f64; 3],
    pub pivot: [f64; 3],
    pub scale_axis_deg: f64,
    /// Chamfer distance to the segmented instance (m²).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassThrough {
    /// PLY file with the scanned points of the instances below, relative to
    /// the layout document.
    pub cloud: String,
    pub instance_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    /// Input name → SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub format: String,
    pub mode: OutputMode,
    pub envelope: EnvelopeSummary,
    pub placements: Vec<PlacementRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_through: Option<PassThrough>,
    /// Constraint violations left after resolution.
    #[serde(default)]
    pub residual_violations: Vec<String>,
    pub provenance: Provenance,
}

impl LayoutDocument {
    pub fn validate(&self) -> Result<(), String> {
        if self.format != LAYOUT_FORMAT {
            return Err(format!("unknown layout format '{}'", self.format));
        }
        for p in &self.placements {
            if !(0.0..360.0).contains(&p.rotation_deg) {
                return Err(format!(
                    "placement of instance {}: rotation {} outside [0, 360)",
                    p.instance_id, p.rotation_deg
                ));
            }
            if p.scale.iter().any(|s| !(*s > 0.0)) {
                return Err(format!("placement of instance {}: non-positive scale", p.instance_id));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("layout serializes");
        s.push('\n');
        s
    }
}

pub fn write_layout(doc: &LayoutDocument, path: &Path) -> Result<(), FormatError> {
    doc.validate().map_err(FormatError::Invalid)?;
    write_bytes(path, doc.to_json().as_bytes())
}

pub fn read_layout(path: &Path) -> Result<LayoutDocument, FormatError> {
    let text = read_text(path)?;
    let doc: LayoutDocument = serde_json::from_str(&text).map_err(|e| {
        FormatError::parse(path, format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    doc.validate()
        .map_err(|m| FormatError::parse(path, "document", m))?;
    Ok(doc)
}
