use nalgebra::{Matrix3, Point3, Rotation3, Vector2, Vector3};
use rayon::prelude::*;

use super::{CandidateModel, RegistrationError};
use crate::envelope::FloorFrame;
use crate::geom::{compute_pca, one_sided_chamfer, ChamferMetric, GeomError, NnIndex, PointCloud};
use crate::io::PlacementRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// Independent ratios along the two in-plane axes and the up axis.
    #[default]
    Anisotropic,
    /// The major-axis ratio applied to all three axes.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub angle_step_deg: u32,
    pub scale_mode: ScaleMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            angle_step_deg: 20,
            scale_mode: ScaleMode::Anisotropic,
        }
    }
}

/// Pose of a catalog model in the scene.
///
/// A model point `p` lands at `translation + F·Rz(rotation_deg)·S·(p − pivot)`
/// with `F = [f1 f2 normal]` and `S` scaling by `scale` along the model's
/// in-plane principal axes (at `scale_axis_deg`) and its up axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub model_id: String,
    pub category: String,
    pub scale: [f64; 3],
    pub rotation_deg: f64,
    pub translation: Vector3<f64>,
    pub pivot: Point3<f64>,
    pub scale_axis_deg: f64,
    /// Symmetric squared chamfer distance to the target (m²).
    pub score: f64,
}

fn scale_matrix(scale: [f64; 3], axis_deg: f64) -> Matrix3<f64> {
    let u = Rotation3::from_axis_angle(&Vector3::z_axis(), axis_deg.to_radians());
    u.matrix() * Matrix3::from_diagonal(&Vector3::from(scale)) * u.matrix().transpose()
}

fn linear_map(frame: &FloorFrame, rotation_deg: f64, scale: [f64; 3], axis_deg: f64) -> Matrix3<f64> {
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), rotation_deg.to_radians());
    frame.basis() * rz.matrix() * scale_matrix(scale, axis_deg)
}

impl Placement {
    /// Linear part of the model-to-world map.
    pub fn linear(&self, frame: &FloorFrame) -> Matrix3<f64> {
        linear_map(frame, self.rotation_deg, self.scale, self.scale_axis_deg)
    }

    pub fn apply(&self, frame: &FloorFrame, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.translation + self.linear(frame) * (p - self.pivot))
    }

    pub fn transform_points(&self, frame: &FloorFrame, points: &[Point3<f64>]) -> Vec<Point3<f64>> {
        let a = self.linear(frame);
        points.iter().map(|p| Point3::from(self.translation + a * (p - self.pivot))).collect()
    }

    pub fn to_record(&self, instance_id: u32) -> PlacementRecord {
        let t = self.translation;
        PlacementRecord {
            instance_id,
            model_id: self.model_id.clone(),
            category: self.category.clone(),
            scale: self.scale,
            rotation_deg: self.rotation_deg,
            translation: [t.x, t.y, t.z],
            pivot: [self.pivot.x, self.pivot.y, self.pivot.z],
            scale_axis_deg: self.scale_axis_deg,
            score: self.score,
        }
    }
}

/// Score of one swept angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub rotation_deg: f64,
    pub scale: [f64; 3],
    pub translation: Vector3<f64>,
    pub score: f64,
}

fn check_step(step: u32) -> Result<(), RegistrationError> {
    if step == 0 || 360 % step != 0 {
        return Err(RegistrationError::InvalidAngleStep(step));
    }
    Ok(())
}

fn ratio(target: f64, model: f64) -> f64 {
    if model > 1e-9 && target > 1e-9 {
        target / model
    } else {
        1.0
    }
}

fn extent_along(points: &[Vector2<f64>], dir: &Vector2<f64>) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(dir);
        (lo.min(d), hi.max(d))
    });
    hi - lo
}

/// Places `points` (model frame) at the given rotation and scale with their
/// centroid on `target_centroid`, then scores against the target index.
fn score_pose(
    model: &CandidateModel,
    frame: &FloorFrame,
    target: &PointCloud,
    target_index: &NnIndex,
    target_centroid: &Point3<f64>,
    rotation_deg: f64,
    scale: [f64; 3],
) -> Result<SweepEntry, GeomError> {
    let a = linear_map(frame, rotation_deg, scale, model.scale_axis_deg);
    let model_centroid = model.samples.centroid().ok_or(GeomError::EmptyCloud)?;
    let translation = target_centroid.coords - a * (model_centroid - model.pivot);
    let placed: Vec<Point3<f64>> = model
        .samples
        .points
        .iter()
        .map(|p| Point3::from(translation + a * (p - model.pivot)))
        .collect();
    let placed_index = NnIndex::from_points(placed.clone())?;
    let score = 0.5
        * (one_sided_chamfer(&target.points, &placed_index, ChamferMetric::Squared)
            + one_sided_chamfer(&placed, target_index, ChamferMetric::Squared));
    Ok(SweepEntry {
        rotation_deg,
        scale,
        translation,
        score,
    })
}

/// Scores every angle `0, step, …, 360 − step` about the floor normal.
///
/// At each angle the model's in-plane principal axes point along
/// `rotation + scale_axis_deg` and `+90°`; each scale factor is the target's
/// extent along that direction over the model's extent along its own axis
/// (height extents for the up axis). Centroids are then made to coincide.
pub fn sweep_scores(
    target: &PointCloud,
    model: &CandidateModel,
    frame: &FloorFrame,
    options: FitOptions,
) -> Result<Vec<SweepEntry>, RegistrationError> {
    check_step(options.angle_step_deg)?;
    compute_pca(target)?.require_planar()?;
    let local: Vec<Vector3<f64>> = target.points.iter().map(|p| frame.to_local(p)).collect();
    let planar: Vec<Vector2<f64>> = local.iter().map(|l| l.xy()).collect();
    let (hlo, hhi) = local
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l.z), hi.max(l.z)));
    let height_ratio = ratio(hhi - hlo, model.extents[2]);
    let target_index = NnIndex::build(target)?;
    let target_centroid = target.centroid().ok_or(GeomError::EmptyCloud)?;
    let step = options.angle_step_deg;
    let angles: Vec<u32> = (0..360 / step).map(|k| k * step).collect();
    let entries: Result<Vec<SweepEntry>, GeomError> = angles
        .par_iter()
        .map(|&deg| {
            let a = (deg as f64 + model.scale_axis_deg).to_radians();
            let d1 = Vector2::new(a.cos(), a.sin());
            let d2 = Vector2::new(-a.sin(), a.cos());
            let s1 = ratio(extent_along(&planar, &d1), model.extents[0]);
            let scale = match options.scale_mode {
                ScaleMode::Anisotropic => [s1, ratio(extent_along(&planar, &d2), model.extents[1]), height_ratio],
                ScaleMode::Uniform => [s1; 3],
            };
            score_pose(model, frame, target, &target_index, &target_centroid, deg as f64, scale)
        })
        .collect();
    Ok(entries?)
}

/// Best swept pose; ties go to the smaller angle.
pub fn fit_placement(
    target: &PointCloud,
    model: &CandidateModel,
    frame: &FloorFrame,
    options: FitOptions,
) -> Result<Placement, RegistrationError> {
    let entries = sweep_scores(target, model, frame, options)?;
    let mut best = &entries[0];
    for e in &entries[1..] {
        if e.score < best.score {
            best = e;
        }
    }
    Ok(Placement {
        model_id: model.id.clone(),
        category: model.category.clone(),
        scale: best.scale,
        rotation_deg: best.rotation_deg,
        translation: best.translation,
        pivot: model.pivot,
        scale_axis_deg: model.scale_axis_deg,
        score: best.score,
    })
}

/// Model up axis on the floor normal, no rotation or scaling, centroids
/// coincident.
pub fn baseline_placement(
    target: &PointCloud,
    model: &CandidateModel,
    frame: &FloorFrame,
) -> Result<Placement, RegistrationError> {
    let target_index = NnIndex::build(target)?;
    let target_centroid = target.centroid().ok_or(GeomError::EmptyCloud)?;
    let e = score_pose(model, frame, target, &target_index, &target_centroid, 0.0, [1.0; 3])?;
    Ok(Placement {
        model_id: model.id.clone(),
        category: model.category.clone(),
        scale: e.scale,
        rotation_deg: 0.0,
        translation: e.translation,
        pivot: model.pivot,
        scale_axis_deg: model.scale_axis_deg,
        score: e.score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RigidTransform;
    use crate::registration::candidate::tests::chair_mesh;
    use proptest::prelude::*;

    fn chair() -> CandidateModel {
        CandidateModel::new("chair-a", "chair", chair_mesh(), 2048, 3).unwrap()
    }

    fn posed_target(model: &CandidateModel, frame: &FloorFrame, deg: f64, scale: [f64; 3], t: Vector3<f64>) -> PointCloud {
        let p = Placement {
            model_id: model.id.clone(),
            category: model.category.clone(),
            scale,
            rotation_deg: deg,
            translation: t,
            pivot: model.pivot,
            scale_axis_deg: model.scale_axis_deg,
            score: 0.0,
        };
        PointCloud::new(p.transform_points(frame, &model.samples.points))
    }

    #[test]
    fn recovers_rotation_and_uniform_scale() {
        let m = chair();
        let frame = FloorFrame::world(Point3::origin());
        let target = posed_target(&m, &frame, 40.0, [1.5; 3], Vector3::new(1.0, 2.0, 0.3));
        let p = fit_placement(&target, &m, &frame, FitOptions::default()).unwrap();
        assert_eq!(p.rotation_deg, 40.0);
        for s in p.scale {
            assert!((s - 1.5).abs() < 0.03, "{:?}", p.scale);
        }
        assert!(p.score < 1e-4, "{}", p.score);
        let u = fit_placement(&target, &m, &frame, FitOptions { scale_mode: ScaleMode::Uniform, ..Default::default() }).unwrap();
        assert_eq!(u.rotation_deg, 40.0);
        assert!(u.scale.iter().all(|&s| s == u.scale[0]));
    }

    #[test]
    fn recovers_anisotropic_scale() {
        let m = chair();
        let frame = FloorFrame::world(Point3::new(0.0, 0.0, -1.0));
        let target = posed_target(&m, &frame, 260.0, [0.8, 1.3, 1.1], Vector3::zeros());
        let p = fit_placement(&target, &m, &frame, FitOptions::default()).unwrap();
        assert_eq!(p.rotation_deg, 260.0);
        for (a, b) in p.scale.iter().zip([0.8, 1.3, 1.1]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_beats_baseline_on_untransformed_samples() {
        let m = chair();
        let frame = FloorFrame::world(Point3::origin());
        let target = m.samples.clone();
        let b = baseline_placement(&target, &m, &frame).unwrap();
        assert_eq!(b.rotation_deg, 0.0);
        assert_eq!(b.scale, [1.0; 3]);
        assert!(b.score < 1e-20);
        let f = fit_placement(&target, &m, &frame, FitOptions::default()).unwrap();
        assert!(f.score <= b.score + 1e-15);
    }

    #[test]
    fn baseline_does_not_scale() {
        let m = chair();
        let frame = FloorFrame::world(Point3::origin());
        let target = posed_target(&m, &frame, 0.0, [2.0; 3], Vector3::zeros());
        let b = baseline_placement(&target, &m, &frame).unwrap();
        assert!(b.score > 1e-3);
        assert_eq!(b.scale, [1.0; 3]);
        assert!(matches!(
            baseline_placement(&PointCloud::default(), &m, &frame),
            Err(RegistrationError::Geom(GeomError::EmptyCloud))
        ));
    }

    #[test]
    fn bad_step_and_degenerate_target() {
        let m = chair();
        let frame = FloorFrame::world(Point3::origin());
        let opts = FitOptions { angle_step_deg: 7, ..Default::default() };
        assert!(matches!(
            fit_placement(&m.samples, &m, &frame, opts),
            Err(RegistrationError::InvalidAngleStep(7))
        ));
        let line = PointCloud::new((0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect());
        assert!(matches!(
            fit_placement(&line, &m, &frame, FitOptions::default()),
            Err(RegistrationError::Geom(GeomError::DegenerateCloud(_)))
        ));
    }

    #[test]
    fn returned_angle_is_sweep_minimum() {
        let m = chair();
        let frame = FloorFrame::world(Point3::origin());
        let target = posed_target(&m, &frame, 123.0, [1.1, 0.9, 1.0], Vector3::new(0.5, 0.0, 0.0));
        let opts = FitOptions { angle_step_deg: 30, ..Default::default() };
        let sweep = sweep_scores(&target, &m, &frame, opts).unwrap();
        assert_eq!(sweep.len(), 12);
        let p = fit_placement(&target, &m, &frame, opts).unwrap();
        let min = sweep.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
        assert_eq!(p.score, min);
        let first = sweep.iter().find(|e| e.score == min).unwrap();
        assert_eq!(p.rotation_deg, first.rotation_deg);
    }

    #[test]
    fn placement_maps_pivot_to_translation() {
        let m = chair();
        let frame = FloorFrame::world(Point3::origin());
        let p = fit_placement(&m.samples, &m, &frame, FitOptions::default()).unwrap();
        let rec = p.to_record(7);
        assert_eq!(rec.instance_id, 7);
        assert!((p.apply(&frame, &m.pivot).coords - p.translation).norm() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn fit_is_rigidly_equivariant(ax in -1.0f64..1.0, ay in -1.0f64..1.0, ang in 0.0f64..6.28,
                                      t in prop::array::uniform3(-5.0f64..5.0), deg in 0u32..18) {
            let m = CandidateModel::new("c", "chair", chair_mesh(), 512, 9).unwrap();
            let frame = FloorFrame::world(Point3::origin());
            let target = posed_target(&m, &frame, (deg * 20) as f64 + 7.0, [1.2, 0.9, 1.0], Vector3::new(0.3, -0.2, 0.1));
            let base = fit_placement(&target, &m, &frame, FitOptions::default()).unwrap();
            let r = RigidTransform::new(
                Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(ax, ay, 1.0)), ang),
                Vector3::from(t),
            );
            let moved_frame = FloorFrame {
                origin: r.apply_point(&frame.origin),
                f1: r.apply_vector(&frame.f1),
                f2: r.apply_vector(&frame.f2),
                normal: r.apply_vector(&frame.normal),
            };
            let moved = fit_placement(&target.transformed(&r), &m, &moved_frame, FitOptions::default()).unwrap();
            prop_assert_eq!(moved.rotation_deg, base.rotation_deg);
            prop_assert!((moved.score - base.score).abs() < 1e-6);
            let expected = r.apply_point(&Point3::from(base.translation));
            prop_assert!((moved.translation - expected.coords).norm() < 1e-6);
        }
    }
}
