use nalgebra::{Point3, Vector3};

use super::{GeomError, RigidTransform};

/// Colored 3D points. Colors, when present, are RGB triples in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            colors: None,
        }
    }

    pub fn with_colors(points: Vec<Point3<f64>>, colors: Vec<[f64; 3]>) -> Result<Self, GeomError> {
        if colors.len() != points.len() {
            return Err(GeomError::LengthMismatch {
                what: "colors",
                expected: points.len(),
                found: colors.len(),
            });
        }
        Ok(Self {
            points,
            colors: Some(colors),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks that every coordinate is finite and the color table matches.
    pub fn validate(&self) -> Result<(), GeomError> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(GeomError::NonFinite(i));
        }
        if let Some(colors) = &self.colors {
            if colors.len() != self.points.len() {
                return Err(GeomError::LengthMismatch {
                    what: "colors",
                    expected: self.points.len(),
                    found: colors.len(),
                });
            }
        }
        Ok(())
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        centroid(&self.points)
    }

    pub fn transformed(&self, transform: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| transform.apply_point(p)).collect(),
            colors: self.colors.clone(),
        }
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + offset).collect(),
            colors: self.colors.clone(),
        }
    }

    /// Points at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Concatenates clouds. Colors survive only if every part carries them.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a PointCloud>) -> Self {
        let mut out = PointCloud::default();
        let mut colors = Some(Vec::new());
        for part in parts {
            out.points.extend_from_slice(&part.points);
            match (&mut colors, &part.colors) {
                (Some(acc), Some(c)) => acc.extend_from_slice(c),
                _ => colors = None,
            }
        }
        out.colors = colors.filter(|c| !c.is_empty() || out.points.is_empty());
        if out.points.is_empty() {
            out.colors = None;
        }
        out
    }
}

pub(crate) fn centroid(points: &[Point3<f64>]) -> Option<Point3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}
