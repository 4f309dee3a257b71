use nalgebra::Point3;

use super::{GeomError, NnIndex, PointCloud};

/// Per-point distance used inside the chamfer means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferMetric {
    /// Squared Euclidean distance (m²).
    #[default]
    Squared,
    /// Euclidean distance (m).
    Euclidean,
}

/// Symmetric squared chamfer distance: the mean squared nearest distance from
/// `a` to `b` and from `b` to `a`, averaged.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, GeomError> {
    chamfer_distance_with(a, b, ChamferMetric::Squared)
}

pub fn chamfer_distance_with(
    a: &PointCloud,
    b: &PointCloud,
    metric: ChamferMetric,
) -> Result<f64, GeomError> {
    let ia = NnIndex::from_points(a.points.clone())?;
    let ib = NnIndex::from_points(b.points.clone())?;
    Ok(0.5 * (one_sided_chamfer(&a.points, &ib, metric) + one_sided_chamfer(&b.points, &ia, metric)))
}

/// Mean distance from each of `from` to its nearest neighbor in `to`.
/// Returns 0 for an empty `from`.
pub fn one_sided_chamfer(from: &[Point3<f64>], to: &NnIndex, metric: ChamferMetric) -> f64 {
    if from.is_empty() {
        return 0.0;
    }
    let sum: f64 = from
        .iter()
        .map(|p| {
            let d2 = to.nearest(p).1;
            match metric {
                ChamferMetric::Squared => d2,
                ChamferMetric::Euclidean => d2.sqrt(),
            }
        })
        .sum();
    sum / from.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RigidTransform;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
    }

    #[test]
    fn single_pair() {
        let a = PointCloud::new(vec![Point3::origin()]);
        let b = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(
            chamfer_distance_with(&a, &b, ChamferMetric::Euclidean).unwrap(),
            1.0
        );
    }

    #[test]
    fn identity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_cloud(&mut rng, 150);
        let b = random_cloud(&mut rng, 90);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(
            chamfer_distance(&a, &b).unwrap(),
            chamfer_distance(&b, &a).unwrap()
        );
    }

    #[test]
    fn rigid_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_cloud(&mut rng, 200);
        let b = random_cloud(&mut rng, 180);
        let t = RigidTransform::new(
            Rotation3::from_euler_angles(0.1, 0.9, 2.0),
            Vector3::new(5.0, 1.0, -3.0),
        );
        let before = chamfer_distance(&a, &b).unwrap();
        let after = chamfer_distance(&a.transformed(&t), &b.transformed(&t)).unwrap();
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn empty_input_fails() {
        let a = PointCloud::new(vec![Point3::origin()]);
        assert_eq!(
            chamfer_distance(&a, &PointCloud::default()).unwrap_err(),
            GeomError::EmptyCloud
        );
    }
}
