//! Run manifest: `run.json` in the output directory.
//!
//! It records the subcommand, tool and format versions, the seed, the
//! resolved parameters, the SHA-256 of every input and of every file written.
//! There are no timestamps, so rerunning with the same inputs and seed
//! reproduces the manifest byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use roomfit_core::io::{DepthFrame, ModelDatabase, DATABASE_INDEX, LAYOUT_FORMAT};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "run.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub versions: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub params: serde_json::Value,
    pub inputs: BTreeMap<String, InputRecord>,
    /// Output path relative to the output directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub exit_code: i32,
}

fn hex(digest: impl AsRef<[u8]>) -> String {
    digest.as_ref().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Input(format!("missing file: {}", path.display())),
        _ => CliError::Other(format!("{}: {e}", path.display())),
    })?;
    Ok(hex(Sha256::digest(&bytes)))
}

/// Digest over the index and every mesh file, in index order.
pub fn sha256_database(db: &ModelDatabase) -> Result<String, CliError> {
    let mut h = Sha256::new();
    for rel in std::iter::once(PathBuf::from(DATABASE_INDEX)).chain(db.entries.iter().map(|e| e.mesh.clone())) {
        let path = db.root.join(&rel);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        h.update(rel.to_string_lossy().as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(h.finalize()))
}

/// Digest of decoded frames: sizes, intrinsics, poses, depth and color.
/// Covers the image files the manifest points to.
pub fn sha256_frames(frames: &[DepthFrame]) -> String {
    let mut h = Sha256::new();
    for f in frames {
        h.update((f.width as u64).to_le_bytes());
        h.update((f.height as u64).to_le_bytes());
        let k = f.intrinsics;
        for v in [k.fx, k.fy, k.cx, k.cy] {
            h.update(v.to_le_bytes());
        }
        for v in f.pose.rotation.matrix().iter().chain(f.pose.translation.iter()) {
            h.update(v.to_le_bytes());
        }
        for d in &f.depth {
            h.update(d.to_le_bytes());
        }
        if let Some(c) = &f.color {
            for p in c {
                h.update(p);
            }
        }
    }
    hex(h.finalize())
}

pub struct Recorder {
    out: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, out: &Path, seed: Option<u64>, params: &impl Serialize) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(|e| CliError::Other(format!("cannot create {}: {e}", out.display())))?;
        let versions = BTreeMap::from([
            ("roomfit".to_string(), roomfit_core::VERSION.to_string()),
            ("layout_format".to_string(), LAYOUT_FORMAT.to_string()),
        ]);
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                tool: "roomfit".into(),
                command: command.into(),
                versions,
                seed,
                params: serde_json::to_value(params).map_err(|e| CliError::Other(e.to_string()))?,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                exit_code: 0,
            },
        })
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn input(&mut self, name: &str, path: &Path, sha256: String) {
        self.manifest.inputs.insert(
            name.into(),
            InputRecord {
                path: path.to_path_buf(),
                sha256,
            },
        );
    }

    pub fn input_file(&mut self, name: &str, path: &Path) -> Result<String, CliError> {
        let digest = sha256_file(path)?;
        self.input(name, path, digest.clone());
        Ok(digest)
    }

    /// Name → digest map for layout provenance.
    pub fn input_digests(&self) -> BTreeMap<String, String> {
        self.manifest
            .inputs
            .iter()
            .map(|(k, v)| (k.clone(), v.sha256.clone()))
            .collect()
    }

    /// Records a file already written under the output directory.
    pub fn output(&mut self, rel: &str) -> Result<(), CliError> {
        let digest = sha256_file(&self.out.join(rel))?;
        self.manifest.outputs.insert(rel.replace('\\', "/"), digest);
        Ok(())
    }

    /// Records every file under `rel` (a directory), recursively.
    pub fn output_dir(&mut self, rel: &str) -> Result<(), CliError> {
        let mut stack = vec![PathBuf::from(rel)];
        while let Some(dir) = stack.pop() {
            let entries = std::fs::read_dir(self.out.join(&dir))
                .map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
            for entry in entries {
                let entry = entry.map_err(|e| CliError::Other(e.to_string()))?;
                let rel_path = dir.join(entry.file_name());
                if entry.path().is_dir() {
                    stack.push(rel_path);
                } else {
                    self.output(&rel_path.to_string_lossy())?;
                }
            }
        }
        Ok(())
    }

    pub fn write(mut self, exit_code: i32) -> Result<(), CliError> {
        self.manifest.exit_code = exit_code;
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        let path = self.out.join(MANIFEST_NAME);
        std::fs::write(&path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    }
}
