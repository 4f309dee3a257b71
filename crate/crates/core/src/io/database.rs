use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{read_mesh, read_text, write_bytes, FormatError};
use crate::geom::TriangleMesh;

/// File name of the database index inside the database root.
pub const DATABASE_INDEX: &str = "index.toml";

/// Which model axis points up in the mesh file. Models face +z in their
/// file frame either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    /// ShapeNet convention.
    #[default]
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    pub category: String,
    /// Mesh path relative to the database root.
    pub mesh: PathBuf,
    #[serde(default)]
    pub up: UpAxis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexFile {
    #[serde(default)]
    model: Vec<ModelEntry>,
}

/// On-disk furniture catalog: one directory per category holding OBJ files,
/// plus `index.toml` mapping model ids to categories.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDatabase {
    pub root: PathBuf,
    pub entries: Vec<ModelEntry>,
}

impl ModelDatabase {
    /// Opens `root/index.toml` and checks that every mesh parses.
    pub fn open(root: &Path) -> Result<Self, FormatError> {
        let index_path = root.join(DATABASE_INDEX);
        let text = read_text(&index_path)?;
        let index: IndexFile = toml::from_str(&text)
            .map_err(|e| FormatError::parse(&index_path, "document", e.message().to_string()))?;
        let mut seen = std::collections::HashSet::new();
        for (i, e) in index.model.iter().enumerate() {
            let loc = format!("model {i}");
            if e.category.trim().is_empty() {
                return Err(FormatError::parse(&index_path, &loc, "empty category"));
            }
            if !seen.insert(e.id.clone()) {
                return Err(FormatError::parse(&index_path, &loc, format!("duplicate id '{}'", e.id)));
            }
            let mesh = read_mesh(&root.join(&e.mesh))?;
            if mesh.mesh.triangles.is_empty() {
                return Err(FormatError::parse(
                    &root.join(&e.mesh),
                    "document",
                    "mesh has no faces",
                ));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            entries: index.model,
        })
    }

    /// Writes the index for `entries` under `root`. Mesh files must already exist.
    pub fn create(root: &Path, entries: Vec<ModelEntry>) -> Result<Self, FormatError> {
        let text = toml::to_string_pretty(&IndexFile {
            model: entries.clone(),
        })
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
        write_bytes(&root.join(DATABASE_INDEX), text.as_bytes())?;
        Self::open(root)
    }

    pub fn categories(&self) -> Vec<String> {
        let mut c: Vec<String> = self.entries.iter().map(|e| e.category.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn models_in(&self, category: &str) -> Vec<&ModelEntry> {
        self.entries
            .iter()
            .filter(|e| e.category.eq_ignore_ascii_case(category))
            .collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Loads a model mesh in the canonical z-up frame.
    pub fn load_mesh(&self, entry: &ModelEntry) -> Result<TriangleMesh, FormatError> {
        let mesh = read_mesh(&self.root.join(&entry.mesh))?.mesh;
        Ok(match entry.up {
            UpAxis::Z => mesh,
            // +90° about x: y → z, z → −y
            UpAxis::Y => mesh.map_vertices(|p| Point3::new(p.x, -p.z, p.y)),
        })
    }
}
