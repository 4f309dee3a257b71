use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_bytes, FormatError};
use crate::geom::PointCloud;

/// One labeled instance of a segmented scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: u32,
    pub label: String,
    pub indices: Vec<usize>,
}

/// A point cloud partitioned into labeled, disjoint instances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentedScene {
    pub cloud: PointCloud,
    /// Sorted by instance id.
    pub instances: Vec<Instance>,
    /// Non-fatal issues found while reading labels.
    pub warnings: Vec<String>,
}

/// Structural categories; everything else is furniture.
pub const STRUCTURE_LABELS: &[&str] = &["wall", "floor", "ceiling"];

impl SegmentedScene {
    pub fn instance(&self, id: u32) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn instance_cloud(&self, instance: &Instance) -> PointCloud {
        self.cloud.subset(&instance.indices)
    }

    /// All points of instances with this label (case-insensitive), in
    /// instance order.
    pub fn cloud_with_label(&self, label: &str) -> PointCloud {
        let idx: Vec<usize> = self
            .instances
            .iter()
            .filter(|i| i.label.eq_ignore_ascii_case(label))
            .flat_map(|i| i.indices.iter().copied())
            .collect();
        self.cloud.subset(&idx)
    }

    /// All points not belonging to instances with this label (unlabeled
    /// points included).
    pub fn cloud_without_label(&self, label: &str) -> PointCloud {
        let mut keep = vec![true; self.cloud.len()];
        for inst in self.instances.iter().filter(|i| i.label.eq_ignore_ascii_case(label)) {
            for &k in &inst.indices {
                keep[k] = false;
            }
        }
        let idx: Vec<usize> = (0..self.cloud.len()).filter(|&k| keep[k]).collect();
        self.cloud.subset(&idx)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.instances.iter().any(|i| i.label.eq_ignore_ascii_case(label))
    }

    pub fn furniture(&self) -> impl Iterator<Item = &Instance> {
        self.instances.iter().filter(|i| {
            !STRUCTURE_LABELS
                .iter()
                .any(|s| i.label.eq_ignore_ascii_case(s))
        })
    }
}

/// Reads a label file: one `<point index> <instance id> <category>` triple
/// per line, `#` comments allowed. A point listed twice keeps its first
/// assignment (a warning is recorded).
pub fn read_labels(path: &Path, cloud: PointCloud) -> Result<SegmentedScene, FormatError> {
    let text = read_text(path)?;
    let mut owner: Vec<Option<u32>> = vec![None; cloud.len()];
    let mut instances: BTreeMap<u32, Instance> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let loc = format!("line {line_no}");
        let [index, id, label] = toks.as_slice() else {
            return Err(FormatError::parse(
                path,
                &loc,
                "expected '<point index> <instance id> <category>'",
            ));
        };
        let index: usize = index
            .parse()
            .map_err(|_| FormatError::parse(path, &loc, format!("bad point index '{index}'")))?;
        let id: u32 = id
            .parse()
            .map_err(|_| FormatError::parse(path, &loc, format!("bad instance id '{id}'")))?;
        if index >= cloud.len() {
            return Err(FormatError::IndexOutOfRange {
                path: path.to_path_buf(),
                line: line_no,
                index,
                len: cloud.len(),
            });
        }
        let inst = instances.entry(id).or_insert_with(|| Instance {
            id,
            label: label.to_string(),
            indices: Vec::new(),
        });
        if inst.label != *label {
            return Err(FormatError::parse(
                path,
                &loc,
                format!("instance {id} labeled both '{}' and '{label}'", inst.label),
            ));
        }
        if let Some(first) = owner[index] {
            let msg = format!(
                "line {line_no}: point {index} already assigned to instance {first}; keeping first"
            );
            log::warn!("{}: {msg}", path.display());
            warnings.push(msg);
            continue;
        }
        owner[index] = Some(id);
        inst.indices.push(index);
    }
    Ok(SegmentedScene {
        cloud,
        instances: instances.into_values().filter(|i| !i.indices.is_empty()).collect(),
        warnings,
    })
}

pub fn write_labels(scene: &SegmentedScene, path: &Path) -> Result<(), FormatError> {
    let mut out = String::from("# point_index instance_id category\n");
    for inst in &scene.instances {
        for &i in &inst.indices {
            let _ = writeln!(out, "{i} {} {}", inst.id, inst.label);
        }
    }
    write_bytes(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn ten_points() -> PointCloud {
        PointCloud::new((0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect())
    }

    fn labels(body: &str) -> Result<SegmentedScene, FormatError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        std::fs::write(&p, body).unwrap();
        read_labels(&p, ten_points())
    }

    #[test]
    fn two_instances_of_five() {
        let mut body = String::new();
        for i in 0..5 {
            body += &format!("{i} 1 floor\n");
        }
        for i in 5..10 {
            body += &format!("{i} 2 wall\n");
        }
        let s = labels(&body).unwrap();
        assert_eq!(s.instances.len(), 2);
        assert_eq!(s.instances[0].label, "floor");
        assert_eq!(s.instances[0].indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.instances[1].indices.len(), 5);
        assert_eq!(s.furniture().count(), 0);
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            labels("99 1 floor\n"),
            Err(FormatError::IndexOutOfRange { index: 99, len: 10, line: 1, .. })
        ));
    }

    #[test]
    fn duplicates_keep_first() {
        let s = labels("# header\n0 1 floor\n0 2 chair\n1 2 chair\n").unwrap();
        assert_eq!(s.instance(1).unwrap().indices, vec![0]);
        assert_eq!(s.instance(2).unwrap().indices, vec![1]);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn conflicting_instance_label_is_rejected() {
        assert!(matches!(labels("0 1 floor\n1 1 wall\n"), Err(FormatError::Parse { .. })));
    }
}
