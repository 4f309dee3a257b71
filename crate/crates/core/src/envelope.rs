//! Room envelope: floor frame, floor contour, wall height and volume.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use thiserror::Error;

use crate::geom::polygon::{convex_hull, signed_area};
use crate::geom::{compute_pca, GeomError, PointCloud};
use crate::io::{EnvelopeSummary, FormatError, SegmentedScene};

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("scene has no {0} instance")]
    MissingCategory(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Orthonormal floor frame. `normal = f1 × f2` points into the room.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorFrame {
    pub origin: Point3<f64>,
    pub f1: Vector3<f64>,
    pub f2: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl FloorFrame {
    /// World-aligned frame at `origin`.
    pub fn world(origin: Point3<f64>) -> Self {
        Self {
            origin,
            f1: Vector3::x(),
            f2: Vector3::y(),
            normal: Vector3::z(),
        }
    }

    /// Columns `[f1 f2 normal]`; maps frame coordinates to world directions.
    pub fn basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.f1, self.f2, self.normal])
    }

    pub fn height(&self, p: &Point3<f64>) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    pub fn to_plane(&self, p: &Point3<f64>) -> Point2<f64> {
        let d = p - self.origin;
        Point2::new(d.dot(&self.f1), d.dot(&self.f2))
    }

    /// `(u, v, h)` in frame coordinates.
    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.basis().transpose() * (p - self.origin)
    }

    pub fn to_world(&self, local: &Vector3<f64>) -> Point3<f64> {
        self.origin + self.basis() * local
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorModel {
    pub frame: FloorFrame,
    /// Counter-clockwise, first vertex lexicographically smallest.
    pub contour: Vec<Point2<f64>>,
    pub area: f64,
    /// Contour bounds along (f1, f2).
    pub dims: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomEnvelope {
    pub floor: FloorModel,
    pub height: f64,
    pub volume: f64,
    /// Wall points below the floor whose heights were clamped to zero.
    pub clamped_heights: usize,
}

impl RoomEnvelope {
    pub fn summary(&self) -> EnvelopeSummary {
        let f = &self.floor.frame;
        let v = |x: &Vector3<f64>| [x.x, x.y, x.z];
        EnvelopeSummary {
            origin: [f.origin.x, f.origin.y, f.origin.z],
            f1: v(&f.f1),
            f2: v(&f.f2),
            normal: v(&f.normal),
            contour: self.floor.contour.iter().map(|p| [p.x, p.y]).collect(),
            area: self.floor.area,
            dims: self.floor.dims,
            height: self.height,
            volume: self.volume,
        }
    }
}

/// Fits the floor plane by PCA and orients its normal.
///
/// The normal is flipped (together with `f2`, keeping the frame right-handed)
/// when the mean height of `reference` is negative. Without a reference it is
/// flipped when more floor points lie below the plane than above.
pub fn fit_floor(floor_points: &PointCloud, reference: Option<&PointCloud>) -> Result<FloorModel, EnvelopeError> {
    let pca = compute_pca(floor_points)?.require_planar()?;
    let [f1, mut f2, _] = pca.axes;
    let mut normal = f1.cross(&f2);
    let origin = pca.centroid;
    let flip = match reference.filter(|r| !r.is_empty()) {
        Some(r) => {
            let mean = r.points.iter().map(|p| (p - origin).dot(&normal)).sum::<f64>() / r.len() as f64;
            mean < 0.0
        }
        None => {
            let (mut above, mut below) = (0usize, 0usize);
            for p in &floor_points.points {
                let h = (p - origin).dot(&normal);
                if h > 0.0 {
                    above += 1;
                } else if h < 0.0 {
                    below += 1;
                }
            }
            below > above
        }
    };
    if flip {
        f2 = -f2;
        normal = -normal;
    }
    let frame = FloorFrame { origin, f1, f2, normal };
    let contour = floor_contour(&frame, floor_points)?;
    Ok(floor_model(frame, contour))
}

fn floor_model(frame: FloorFrame, contour: Vec<Point2<f64>>) -> FloorModel {
    let area = signed_area(&contour);
    let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in &contour {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    FloorModel {
        frame,
        contour,
        area,
        dims: [hi.x - lo.x, hi.y - lo.y],
    }
}

/// Convex hull of the points projected onto the floor plane.
pub fn floor_contour(frame: &FloorFrame, points: &PointCloud) -> Result<Vec<Point2<f64>>, EnvelopeError> {
    let projected: Vec<Point2<f64>> = points.points.iter().map(|p| frame.to_plane(p)).collect();
    let hull = convex_hull(&projected);
    if hull.len() < 3 || signed_area(&hull) <= 0.0 {
        return Err(GeomError::DegenerateCloud("floor projection is collinear".into()).into());
    }
    Ok(hull)
}

/// Nearest-rank percentile of ascending `sorted`: the k-th smallest value
/// with `k = ceil(p·n)`, at least 1.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    // guard against p·n landing a hair above an integer
    let k = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Some(sorted[k - 1])
}

/// 95th nearest-rank percentile of wall heights above the floor, plus the
/// number of below-floor heights clamped to zero.
pub fn room_height_report(wall_points: &PointCloud, floor: &FloorModel) -> Result<(f64, usize), EnvelopeError> {
    if wall_points.is_empty() {
        return Err(GeomError::EmptyCloud.into());
    }
    let mut clamped = 0;
    let mut heights: Vec<f64> = wall_points
        .points
        .iter()
        .map(|p| {
            let h = floor.frame.height(p);
            if h < 0.0 {
                clamped += 1;
                0.0
            } else {
                h
            }
        })
        .collect();
    heights.sort_by(f64::total_cmp);
    Ok((nearest_rank(&heights, 0.95).unwrap(), clamped))
}

pub fn room_height(wall_points: &PointCloud, floor: &FloorModel) -> Result<f64, EnvelopeError> {
    room_height_report(wall_points, floor).map(|(h, _)| h)
}

/// Envelope of a segmented scan. Floor instances are merged for the plane
/// fit, wall instances for the height; everything that is not floor orients
/// the normal.
pub fn build_envelope(scene: &SegmentedScene) -> Result<RoomEnvelope, EnvelopeError> {
    for cat in ["floor", "wall"] {
        if !scene.has_label(cat) {
            return Err(EnvelopeError::MissingCategory(cat.into()));
        }
    }
    let floor_pts = scene.cloud_with_label("floor");
    let walls = scene.cloud_with_label("wall");
    let rest = scene.cloud_without_label("floor");
    let floor = fit_floor(&floor_pts, Some(&rest))?;
    let (height, clamped_heights) = room_height_report(&walls, &floor)?;
    if clamped_heights > 0 {
        log::warn!("{clamped_heights} wall points below the floor clamped to height 0");
    }
    if !(height > 0.0) {
        return Err(GeomError::DegenerateCloud("walls have no height above the floor".into()).into());
    }
    Ok(RoomEnvelope {
        volume: floor.area * height,
        floor,
        height,
        clamped_heights,
    })
}

/// Writes the contour as `u v` lines, one vertex per line.
pub fn write_contour(contour: &[Point2<f64>], path: &Path) -> Result<(), EnvelopeError> {
    let mut s = String::from("# floor contour (f1 f2), meters\n");
    for p in contour {
        let _ = writeln!(s, "{} {}", p.x, p.y);
    }
    crate::io::write_bytes(path, s.as_bytes())?;
    Ok(())
}
