use nalgebra::{Matrix3, Matrix4, Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};

use super::GeomError;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a transform from a raw matrix, rejecting anything that is not
    /// orthonormal with determinant +1 within 1e-9.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        let err = (rotation * rotation.transpose() - Matrix3::identity()).amax();
        if !err.is_finite() || err > ORTHONORMAL_TOL {
            return Err(GeomError::InvalidRotation(format!(
                "R·Rᵀ deviates from identity by {err:e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeomError::InvalidRotation(format!("determinant {det}")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(GeomError::InvalidRotation("non-finite translation".into()));
        }
        Ok(Self::new(
            Rotation3::from_matrix_unchecked(rotation),
            translation,
        ))
    }

    /// Quaternion in `(x, y, z, w)` order, which must already be unit length.
    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Self {
        let uq = UnitQuaternion::new_unchecked(Quaternion::new(q[3], q[0], q[1], q[2]));
        Self::new(uq.to_rotation_matrix(), translation)
    }

    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self, GeomError> {
        let last = m.fixed_view::<1, 4>(3, 0);
        if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > ORTHONORMAL_TOL {
            return Err(GeomError::InvalidRotation(
                "bottom row of a rigid 4×4 matrix must be (0, 0, 0, 1)".into(),
            ));
        }
        Self::from_parts(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation of `angle_rad` about `axis` (need not be normalized), no translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Self::new(Rotation3::from_axis_angle(&axis, angle_rad), Vector3::zeros())
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self::new(r, -(r * self.translation))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }
}
