use std::f64::consts::PI;

use nalgebra::{Point3, Vector2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, RegistrationError};
use crate::geom::{PointCloud, TriangleMesh};
use crate::io::ModelDatabase;

pub const DEFAULT_SAMPLES: usize = 4096;

/// A catalog model ready for fitting, in its canonical z-up frame (front
/// facing −y after the y-up to z-up conversion of the catalog).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub id: String,
    pub category: String,
    pub mesh: TriangleMesh,
    pub samples: PointCloud,
    /// Surface centroid of the mesh; placements rotate and scale about it.
    pub pivot: Point3<f64>,
    /// Major in-plane principal axis of the mesh surface, degrees in `[0, 180)`.
    pub scale_axis_deg: f64,
    /// Sample extents along the major and minor in-plane axes and along z.
    pub extents: [f64; 3],
}

impl CandidateModel {
    pub fn new(
        id: impl Into<String>,
        category: impl Into<String>,
        mesh: TriangleMesh,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self, RegistrationError> {
        let id = id.into();
        let (pivot, second, _) = mesh
            .surface_moments()
            .ok_or_else(|| RegistrationError::EmptyMesh(id.clone()))?;
        let cov = second - pivot.coords * pivot.coords.transpose();
        let mut phi = 0.5 * (2.0 * cov[(0, 1)]).atan2(cov[(0, 0)] - cov[(1, 1)]);
        if phi < 0.0 {
            phi += PI;
        }
        if phi >= PI {
            phi -= PI;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = sample_surface(&mesh, n_samples.max(1), &mut rng);
        let axes = [Vector2::new(phi.cos(), phi.sin()), Vector2::new(-phi.sin(), phi.cos())];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &samples.points {
            let d = p - pivot;
            let proj = [axes[0].x * d.x + axes[0].y * d.y, axes[1].x * d.x + axes[1].y * d.y, d.z];
            for k in 0..3 {
                lo[k] = lo[k].min(proj[k]);
                hi[k] = hi[k].max(proj[k]);
            }
        }
        Ok(Self {
            id,
            category: category.into(),
            mesh,
            samples,
            pivot,
            scale_axis_deg: phi.to_degrees(),
            extents: [0, 1, 2].map(|k| hi[k] - lo[k]),
        })
    }
}

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, rng: &mut impl Rng) -> PointCloud {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for i in 0..mesh.triangles.len() {
        total += mesh.triangle_area(i);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return PointCloud::default();
    }
    let points = (0..n)
        .map(|_| {
            let r = rng.random::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2))
        })
        .collect();
    PointCloud::new(points)
}

/// Draws `min(m, available)` distinct models of `category` uniformly without
/// replacement and samples their surfaces.
pub fn retrieve_candidates(
    db: &ModelDatabase,
    category: &str,
    m: usize,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<CandidateModel>, RegistrationError> {
    let mut pool = db.models_in(category);
    if pool.is_empty() {
        return Err(RegistrationError::UnknownCategory(category.to_string()));
    }
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, pool.len(), m.min(pool.len()));
    picked
        .into_iter()
        .map(|i| {
            let entry = pool[i];
            let mesh = db.load_mesh(entry)?;
            CandidateModel::new(
                entry.id.clone(),
                entry.category.clone(),
                mesh,
                n_samples,
                derive_seed(seed, entry.id.as_bytes()),
            )
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::io::{write_mesh, ModelEntry, UpAxis};

    /// Asymmetric chair-like mesh: seat box, a back panel on one side and a
    /// post on one corner. z-up.
    pub(crate) fn chair_mesh() -> TriangleMesh {
        let mut m = TriangleMesh::default();
        m.append(&cuboid([0.0, 0.0, 0.4], [0.6, 0.5, 0.45]));
        m.append(&cuboid([0.0, 0.45, 0.45], [0.6, 0.5, 1.0]));
        m.append(&cuboid([0.0, 0.0, 0.0], [0.05, 0.05, 0.4]));
        m.append(&cuboid([0.5, 0.0, 0.0], [0.6, 0.15, 0.4]));
        m
    }

    pub(crate) fn cuboid(lo: [f64; 3], hi: [f64; 3]) -> TriangleMesh {
        TriangleMesh::cuboid(lo, hi)
    }

    pub(crate) fn small_db(dir: &std::path::Path, chairs: usize) -> ModelDatabase {
        let mut entries = Vec::new();
        std::fs::create_dir_all(dir.join("chair")).unwrap();
        for i in 0..chairs {
            let id = format!("chair-{i:02}");
            let mesh = chair_mesh().map_vertices(|p| Point3::new(p.x * (1.0 + 0.05 * i as f64), p.y, p.z));
            let rel = std::path::PathBuf::from(format!("chair/{id}.obj"));
            write_mesh(&mesh, &dir.join(&rel)).unwrap();
            entries.push(ModelEntry { id, category: "chair".into(), mesh: rel, up: UpAxis::Z });
        }
        ModelDatabase::create(dir, entries).unwrap()
    }

    #[test]
    fn samples_lie_on_triangles() {
        let mesh = chair_mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cloud = sample_surface(&mesh, 2000, &mut rng);
        assert_eq!(cloud.len(), 2000);
        for p in &cloud.points {
            let on = (0..mesh.triangles.len()).any(|t| {
                let [a, b, c] = mesh.triangle(t);
                let n = (b - a).cross(&(c - a));
                let area2 = n.norm();
                let sub = |x: &Point3<f64>, y: &Point3<f64>| (x - p).cross(&(y - p)).norm();
                (n.dot(&(p - a)) / area2).abs() < 1e-9 && (sub(&a, &b) + sub(&b, &c) + sub(&c, &a) - area2).abs() < 1e-9
            });
            assert!(on, "{p}");
        }
    }

    #[test]
    fn candidate_frame() {
        let c = CandidateModel::new("c", "chair", cuboid([0.0; 3], [2.0, 1.0, 0.5]), 4096, 1).unwrap();
        assert!((c.pivot - Point3::new(1.0, 0.5, 0.25)).norm() < 1e-12);
        assert!(c.scale_axis_deg.abs() < 1e-9);
        assert!((c.extents[0] - 2.0).abs() < 0.01 && (c.extents[1] - 1.0).abs() < 0.01);
        assert!(matches!(
            CandidateModel::new("e", "chair", TriangleMesh::default(), 10, 0),
            Err(RegistrationError::EmptyMesh(_))
        ));
    }

    #[test]
    fn retrieval_is_seeded_and_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let db = small_db(dir.path(), 10);
        let ids = |seed| -> Vec<String> {
            retrieve_candidates(&db, "chair", 3, seed, 64).unwrap().into_iter().map(|c| c.id).collect()
        };
        let a = ids(11);
        assert_eq!(a.len(), 3);
        assert_eq!(a, ids(11));
        let mut d = a.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 3);
        let all = retrieve_candidates(&db, "chair", 20, 5, 16).unwrap();
        let mut ids: Vec<_> = all.iter().map(|c| c.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 10);
        assert!(matches!(
            retrieve_candidates(&db, "sofa", 3, 0, 16),
            Err(RegistrationError::UnknownCategory(_))
        ));
    }
}
