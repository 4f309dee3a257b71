use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{read_text, write_bytes, FormatError};
use crate::geom::TriangleMesh;

/// A parsed OBJ file.
#[derive(Debug, Clone, Default)]
pub struct MeshFile {
    pub mesh: TriangleMesh,
    /// Triangles with zero area. They are kept in `mesh`.
    pub degenerate: Vec<usize>,
    /// Skipped directives, one message per distinct keyword.
    pub warnings: Vec<String>,
}

// Grouping and material statements carry no geometry.
const IGNORED: &[&str] = &["o", "g", "s", "usemtl", "mtllib"];

/// Reads the `v`/`vt`/`vn`/`f` subset of OBJ. Polygons are fan-triangulated.
pub fn read_mesh(path: &Path) -> Result<MeshFile, FormatError> {
    let text = read_text(path)?;
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let (mut n_tex, mut n_norm) = (0usize, 0usize);
    let mut triangles = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let loc = format!("line {}", ln + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or("");
        let rest: Vec<&str> = toks.collect();
        let floats = |n: usize| -> Result<Vec<f64>, FormatError> {
            if rest.len() < n {
                return Err(FormatError::parse(path, &loc, format!("'{key}' needs {n} numbers")));
            }
            rest.iter()
                .take(n)
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| FormatError::parse(path, &loc, format!("bad number '{t}'")))
                })
                .collect()
        };
        match key {
            "v" => {
                let c = floats(3)?;
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            "vt" => {
                floats(1)?;
                n_tex += 1;
            }
            "vn" => {
                floats(3)?;
                n_norm += 1;
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(FormatError::parse(path, &loc, "face needs at least 3 vertices"));
                }
                let mut idx = Vec::with_capacity(rest.len());
                for tok in &rest {
                    let mut parts = tok.split('/');
                    let v = resolve(path, &loc, parts.next(), vertices.len(), "vertex")?;
                    if let Some(t) = parts.next().filter(|s| !s.is_empty()) {
                        resolve(path, &loc, Some(t), n_tex, "texture")?;
                    }
                    if let Some(n) = parts.next().filter(|s| !s.is_empty()) {
                        resolve(path, &loc, Some(n), n_norm, "normal")?;
                    }
                    idx.push(v);
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            k if IGNORED.contains(&k) => {}
            other => {
                let msg = format!("unsupported directive '{other}' skipped");
                if !warnings.contains(&msg) {
                    log::warn!("{}: {msg}", path.display());
                    warnings.push(msg);
                }
            }
        }
    }
    let mesh = TriangleMesh::new(vertices, triangles);
    let degenerate = mesh.degenerate_triangles();
    Ok(MeshFile {
        mesh,
        degenerate,
        warnings,
    })
}

fn resolve(
    path: &Path,
    loc: &str,
    tok: Option<&str>,
    count: usize,
    what: &str,
) -> Result<usize, FormatError> {
    let tok = tok.unwrap_or("");
    let i: i64 = tok
        .parse()
        .map_err(|_| FormatError::parse(path, loc, format!("bad {what} index '{tok}'")))?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        -1
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(FormatError::parse(
            path,
            loc,
            format!("{what} index {i} out of range (have {count})"),
        ));
    }
    Ok(resolved as usize)
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    write_bytes(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE_QUADS: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";

    fn parse(text: &str) -> Result<MeshFile, FormatError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        std::fs::write(&p, text).unwrap();
        read_mesh(&p)
    }

    #[test]
    fn quad_cube_fans_into_twelve_triangles() {
        let m = parse(CUBE_QUADS).unwrap();
        assert_eq!(m.mesh.vertices.len(), 8);
        assert_eq!(m.mesh.triangles.len(), 12);
        assert!(m.degenerate.is_empty());
        assert!((m.mesh.surface_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let noisy = format!("# a cube\n\no cube\n{}\n# trailing\n", CUBE_QUADS.replace("\nf", "\n\nf"));
        let a = parse(CUBE_QUADS).unwrap();
        let b = parse(&noisy).unwrap();
        assert_eq!(a.mesh, b.mesh);
    }

    #[test]
    fn slash_forms_negative_indices_and_degenerates() {
        let m = parse(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nvt 0 0\nvn 0 0 1\n\
             f 1/1/1 2/1/1 3/1/1\nf -4//1 -3//1 -1//1\ncurv 0 1\n",
        )
        .unwrap();
        assert_eq!(m.mesh.triangles, vec![[0, 1, 2], [0, 1, 3]]);
        assert_eq!(m.degenerate, vec![1]);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn out_of_range_index_is_a_parse_error() {
        let err = parse("v 0 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, FormatError::Parse { .. }));
        assert!(err.to_string().contains("line 2"));
    }
}
