use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector2, Vector3};

use super::{GeomError, PointCloud};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

/// Principal axes of a point set.
///
/// `axes` are ordered by descending eigenvalue and form a right-handed frame
/// (`axes[2] = axes[0] × axes[1]`). Extents are `max − min` of the projections
/// onto each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAxes {
    pub centroid: Point3<f64>,
    pub axes: [Vector3<f64>; 3],
    pub eigenvalues: [f64; 3],
    pub extents: [f64; 3],
}

impl PrincipalAxes {
    /// Number of eigenvalues that are non-zero relative to the largest.
    pub fn rank(&self) -> usize {
        let top = self.eigenvalues[0];
        if top <= 0.0 {
            return 0;
        }
        self.eigenvalues
            .iter()
            .filter(|&&l| l > RANK_TOL * top)
            .count()
    }

    /// Fails unless the points span a plane.
    pub fn require_planar(self) -> Result<Self, GeomError> {
        if self.rank() < 2 {
            return Err(GeomError::DegenerateCloud(format!(
                "points are collinear (covariance rank {})",
                self.rank()
            )));
        }
        Ok(self)
    }
}

/// Principal component analysis of the centered covariance.
///
/// Needs at least three points that are not all identical. Collinear input is
/// accepted (the second and third axes then complete an arbitrary orthonormal
/// frame); use [`PrincipalAxes::require_planar`] where a plane is needed.
pub fn compute_pca(cloud: &PointCloud) -> Result<PrincipalAxes, GeomError> {
    compute_pca_points(&cloud.points)
}

pub(crate) fn compute_pca_points(points: &[Point3<f64>]) -> Result<PrincipalAxes, GeomError> {
    if points.len() < 3 {
        return Err(GeomError::DegenerateCloud(format!(
            "PCA needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    if !cov.iter().all(|c| c.is_finite()) {
        return Err(GeomError::DegenerateCloud("non-finite covariance".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let eigenvalues = order.map(|i| eig.eigenvalues[i].max(0.0));
    if eigenvalues[0] <= 0.0 {
        return Err(GeomError::DegenerateCloud("all points coincide".into()));
    }

    let a0 = canonical_sign(eig.eigenvectors.column(order[0]).normalize());
    let a1 = canonical_sign(eig.eigenvectors.column(order[1]).normalize());
    // Re-orthogonalize before the cross product; repeated eigenvalues can
    // leave tiny cross terms.
    let a1 = (a1 - a0 * a0.dot(&a1)).normalize();
    let a2 = a0.cross(&a1).normalize();
    let axes = [a0, a1, a2];

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        let d = p.coords - mean;
        for k in 0..3 {
            let s = d.dot(&axes[k]);
            lo[k] = lo[k].min(s);
            hi[k] = hi[k].max(s);
        }
    }
    Ok(PrincipalAxes {
        centroid: Point3::from(mean),
        axes,
        eigenvalues,
        extents: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
    })
}

/// Flip so the largest-magnitude component is positive (first wins on ties).
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut best = 0;
    for k in 1..3 {
        if v[k].abs() > v[best].abs() + 1e-12 {
            best = k;
        }
    }
    if v[best] < 0.0 {
        -v
    } else {
        v
    }
}

/// In-plane principal axes of 2D points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes2 {
    pub centroid: Vector2<f64>,
    /// Direction of the major axis, radians in `[0, π)`.
    pub angle: f64,
    pub eigenvalues: [f64; 2],
    /// `max − min` along the major and minor axis.
    pub extents: [f64; 2],
}

impl PrincipalAxes2 {
    pub fn major(&self) -> Vector2<f64> {
        Vector2::new(self.angle.cos(), self.angle.sin())
    }

    pub fn minor(&self) -> Vector2<f64> {
        Vector2::new(-self.angle.sin(), self.angle.cos())
    }
}

/// Closed-form 2×2 PCA. Returns `None` for an empty slice.
pub fn principal_axes_2d(points: &[Vector2<f64>]) -> Option<PrincipalAxes2> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - c;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    let mut angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if angle < 0.0 {
        angle += std::f64::consts::PI;
    }
    if angle >= std::f64::consts::PI {
        angle -= std::f64::consts::PI;
    }
    let mid = 0.5 * (sxx + syy);
    let rad = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let mut out = PrincipalAxes2 {
        centroid: c,
        angle,
        eigenvalues: [mid + rad, (mid - rad).max(0.0)],
        extents: [0.0; 2],
    };
    let (major, minor) = (out.major(), out.minor());
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        let d = p - c;
        for (k, axis) in [major, minor].iter().enumerate() {
            let s = d.dot(axis);
            lo[k] = lo[k].min(s);
            hi[k] = hi[k].max(s);
        }
    }
    out.extents = [hi[0] - lo[0], hi[1] - lo[1]];
    Some(out)
}
