//! Layout priors: objects rest on the floor, stay inside the walls and do
//! not intersect each other.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Point2, Vector2, Vector3};
use thiserror::Error;

use crate::envelope::{FloorFrame, RoomEnvelope};
use crate::geom::polygon::outside_distance;
use crate::geom::{obb_overlap, Obb, PointCloud, TriangleMesh};
use crate::io::{
    write_mesh, write_point_cloud, FormatError, LayoutDocument, OutputMode, PassThrough, Provenance, SegmentedScene,
    LAYOUT_FORMAT,
};
use crate::registration::{CandidateModel, Placement};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("instance {0} is not part of the layout")]
    UnknownInstance(u32),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Heights within this distance of the floor count as resting on it.
pub const FLOOR_TOLERANCE: f64 = 1e-6;
/// Outward distances up to this count as touching the wall.
pub const WALL_TOLERANCE: f64 = 1e-9;
/// Extra push past the wall so corrected boxes end strictly inside.
const WALL_MARGIN: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LayoutItem {
    pub instance_id: u32,
    pub placement: Placement,
    pub model: Arc<CandidateModel>,
}

impl LayoutItem {
    pub fn placed_samples(&self, frame: &FloorFrame) -> Vec<nalgebra::Point3<f64>> {
        self.placement.transform_points(frame, &self.model.samples.points)
    }

    /// Box around the placed samples, aligned with the placed model's
    /// in-plane principal axes and the floor normal.
    pub fn obb(&self, frame: &FloorFrame) -> Obb {
        let ang = (self.placement.rotation_deg + self.placement.scale_axis_deg).to_radians();
        let b = frame.basis();
        let a1 = b * Vector3::new(ang.cos(), ang.sin(), 0.0);
        let a2 = b * Vector3::new(-ang.sin(), ang.cos(), 0.0);
        Obb::fit_with_axes(&self.placed_samples(frame), [a1, a2, frame.normal]).expect("candidate samples are non-empty")
    }

    pub fn min_height(&self, frame: &FloorFrame) -> f64 {
        self.placed_samples(frame)
            .iter()
            .map(|p| frame.height(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn placed_mesh(&self, frame: &FloorFrame) -> TriangleMesh {
        self.model.mesh.map_vertices(|p| self.placement.apply(frame, p))
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub envelope: RoomEnvelope,
    /// Sorted by instance id.
    pub items: Vec<LayoutItem>,
}

impl Layout {
    pub fn new(envelope: RoomEnvelope, mut items: Vec<LayoutItem>) -> Self {
        items.sort_by_key(|i| i.instance_id);
        Self { envelope, items }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Floating { instance_id: u32, height: f64 },
    WallPenetration { instance_id: u32, depth: f64 },
    Overlap { a: u32, b: u32, depth: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Floating { instance_id, height } => {
                write!(f, "instance {instance_id}: lowest point {height:.6} m from the floor")
            }
            Violation::WallPenetration { instance_id, depth } => {
                write!(f, "instance {instance_id}: penetrates the walls by {depth:.6} m")
            }
            Violation::Overlap { a, b, depth } => write!(f, "instances {a} and {b}: overlap by {depth:.6} m"),
        }
    }
}

/// Moves the placement along the floor normal so its lowest sample sits at
/// height 0.
pub fn snap_to_floor(item: &LayoutItem, frame: &FloorFrame) -> Placement {
    let mut p = item.placement.clone();
    p.translation -= frame.normal * item.min_height(frame);
    p
}

/// Largest distance by which a floor-plane projection of one of the box's
/// corners lies outside the contour; 0 when all are inside.
pub fn check_wall_penetration(obb: &Obb, envelope: &RoomEnvelope) -> f64 {
    let frame = &envelope.floor.frame;
    obb.corners()
        .iter()
        .map(|c| outside_distance(&envelope.floor.contour, &frame.to_plane(c)))
        .fold(0.0, f64::max)
}

/// In-plane translation that moves every corner inside each violated edge
/// of the (convex, counter-clockwise) contour.
fn wall_correction(obb: &Obb, envelope: &RoomEnvelope) -> Vector2<f64> {
    let frame = &envelope.floor.frame;
    let corners: Vec<Point2<f64>> = obb.corners().iter().map(|c| frame.to_plane(c)).collect();
    let poly = &envelope.floor.contour;
    let mut total = Vector2::zeros();
    for i in 0..poly.len() {
        let a = poly[i];
        let e = poly[(i + 1) % poly.len()] - a;
        let inward = Vector2::new(-e.y, e.x).normalize();
        let out = corners.iter().map(|c| -(c - a).dot(&inward)).fold(f64::NEG_INFINITY, f64::max);
        if out > WALL_TOLERANCE {
            total += inward * (out + WALL_MARGIN);
        }
    }
    total
}

/// Placement state during resolution: the box and lowest height only change
/// by translation, so both are cached.
struct State {
    obb: Obb,
    min_height: f64,
    offset: Vector3<f64>,
}

impl State {
    fn shift(&mut self, d: Vector3<f64>, normal: &Vector3<f64>) {
        self.obb = self.obb.translated(&d);
        self.min_height += d.dot(normal);
        self.offset += d;
    }
}

/// Push direction and depth for two boxes: the floor-projected center
/// difference (f1 when the centers coincide in plan) and the interval
/// overlap of their shadows on it.
fn separation(a: &Obb, b: &Obb, frame: &FloorFrame) -> (Vector3<f64>, f64) {
    let diff = b.center - a.center;
    let planar = diff - frame.normal * diff.dot(&frame.normal);
    let dir = if planar.norm() > 1e-12 { planar.normalize() } else { frame.f1 };
    let depth = a.projection_radius(&dir) + b.projection_radius(&dir) - diff.dot(&dir).abs();
    (dir, depth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub max_rounds: usize,
    /// Gap left between boxes pushed apart (m).
    pub margin: f64,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolveReport {
    /// Wall and overlap violations found at the start of each round.
    pub violations_per_round: Vec<usize>,
    /// Overlapping pairs found at the start of each round.
    pub overlaps_per_round: Vec<usize>,
    /// Violations left at the end, empty on success.
    pub residuals: Vec<Violation>,
}

impl ResolveReport {
    pub fn rounds(&self) -> usize {
        self.violations_per_round.len()
    }

    pub fn is_clean(&self) -> bool {
        self.residuals.is_empty()
    }
}

fn wall_and_overlap_violations(items: &[LayoutItem], states: &[State], envelope: &RoomEnvelope) -> Vec<Violation> {
    let frame = &envelope.floor.frame;
    let mut out = Vec::new();
    for (it, st) in items.iter().zip(states) {
        let depth = check_wall_penetration(&st.obb, envelope);
        if depth > WALL_TOLERANCE {
            out.push(Violation::WallPenetration {
                instance_id: it.instance_id,
                depth,
            });
        }
    }
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            if obb_overlap(&states[i].obb, &states[j].obb) {
                let (_, depth) = separation(&states[i].obb, &states[j].obb, frame);
                out.push(Violation::Overlap {
                    a: items[i].instance_id,
                    b: items[j].instance_id,
                    depth,
                });
            }
        }
    }
    out
}

/// Snaps every object to the floor, then alternates wall corrections,
/// pairwise push-apart (equal split, in instance order) and re-snapping
/// until nothing is violated or the round limit is hit. Whatever remains is
/// reported.
pub fn resolve_layout(layout: &Layout, options: ResolveOptions) -> (Layout, ResolveReport) {
    let envelope = &layout.envelope;
    let frame = envelope.floor.frame;
    let normal = frame.normal;
    let mut states: Vec<State> = layout
        .items
        .iter()
        .map(|it| State {
            obb: it.obb(&frame),
            min_height: it.min_height(&frame),
            offset: Vector3::zeros(),
        })
        .collect();
    let snap = |states: &mut [State]| {
        for s in states.iter_mut() {
            let h = s.min_height;
            s.shift(-normal * h, &normal);
        }
    };
    let push_inside = |states: &mut [State]| {
        for s in states.iter_mut() {
            let c = wall_correction(&s.obb, envelope);
            if c != Vector2::zeros() {
                s.shift(frame.f1 * c.x + frame.f2 * c.y, &normal);
            }
        }
    };
    snap(&mut states);
    let mut report = ResolveReport::default();
    for _ in 0..options.max_rounds {
        let current = wall_and_overlap_violations(&layout.items, &states, envelope);
        let found = current.len();
        report.violations_per_round.push(found);
        report
            .overlaps_per_round
            .push(current.iter().filter(|v| matches!(v, Violation::Overlap { .. })).count());
        if found == 0 {
            break;
        }
        push_inside(&mut states);
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                if !obb_overlap(&states[i].obb, &states[j].obb) {
                    continue;
                }
                let (dir, depth) = separation(&states[i].obb, &states[j].obb, &frame);
                let half = 0.5 * (depth.max(0.0) + options.margin);
                states[i].shift(-dir * half, &normal);
                states[j].shift(dir * half, &normal);
            }
        }
        // pushes may have moved boxes into walls; fix those in this round
        push_inside(&mut states);
        snap(&mut states);
    }
    let mut items = layout.items.clone();
    for (it, st) in items.iter_mut().zip(&states) {
        it.placement.translation += st.offset;
    }
    let mut residuals = Vec::new();
    for (it, st) in items.iter().zip(&states) {
        if st.min_height.abs() > FLOOR_TOLERANCE {
            residuals.push(Violation::Floating {
                instance_id: it.instance_id,
                height: st.min_height,
            });
        }
    }
    residuals.extend(wall_and_overlap_violations(&items, &states, envelope));
    report.residuals = residuals;
    (
        Layout {
            envelope: envelope.clone(),
            items,
        },
        report,
    )
}

/// Final scene: the layout document plus the geometry it refers to.
#[derive(Debug, Clone)]
pub struct FinalLayout {
    pub document: LayoutDocument,
    /// All placed models merged into one mesh.
    pub placed_mesh: TriangleMesh,
    /// Scanned points of the instances that were not replaced (hybrid mode).
    pub pass_through: Option<PointCloud>,
}

/// Builds the layout document. Virtual mode replaces every placed instance;
/// hybrid mode replaces only `keep` and passes the scanned points of every
/// other furniture instance through. `pass_through_name` is the file name
/// the document uses for that cloud.
pub fn finalize_layout(
    layout: &Layout,
    report: &ResolveReport,
    scene: &SegmentedScene,
    mode: OutputMode,
    keep: &[u32],
    provenance: Provenance,
    pass_through_name: &str,
) -> Result<FinalLayout, ConstraintError> {
    let placed_ids: BTreeSet<u32> = layout.items.iter().map(|i| i.instance_id).collect();
    for id in keep {
        if !placed_ids.contains(id) {
            return Err(ConstraintError::UnknownInstance(*id));
        }
    }
    let frame = &layout.envelope.floor.frame;
    let replaced: BTreeSet<u32> = match mode {
        OutputMode::Virtual => placed_ids,
        OutputMode::Hybrid => keep.iter().copied().collect(),
    };
    let mut placements = Vec::new();
    let mut placed_mesh = TriangleMesh::default();
    for item in layout.items.iter().filter(|i| replaced.contains(&i.instance_id)) {
        placements.push(item.placement.to_record(item.instance_id));
        placed_mesh.append(&item.placed_mesh(frame));
    }
    let (pass_through, cloud) = match mode {
        OutputMode::Virtual => (None, None),
        OutputMode::Hybrid => {
            let rest: Vec<_> = scene.furniture().filter(|i| !replaced.contains(&i.id)).collect();
            let cloud = PointCloud::merge(rest.iter().map(|i| scene.instance_cloud(i)).collect::<Vec<_>>().iter());
            (
                Some(PassThrough {
                    cloud: pass_through_name.to_string(),
                    instance_ids: rest.iter().map(|i| i.id).collect(),
                }),
                Some(cloud),
            )
        }
    };
    let document = LayoutDocument {
        format: LAYOUT_FORMAT.to_string(),
        mode,
        envelope: layout.envelope.summary(),
        placements,
        pass_through,
        residual_violations: report.residuals.iter().map(|v| v.to_string()).collect(),
        provenance,
    };
    Ok(FinalLayout {
        document,
        placed_mesh,
        pass_through: cloud,
    })
}

impl FinalLayout {
    /// Writes the document to `layout_path`, the placed meshes next to it
    /// as `<stem>.obj` and the pass-through cloud (if any) under the name
    /// recorded in the document.
    pub fn write(&self, layout_path: &Path) -> Result<(), ConstraintError> {
        crate::io::write_layout(&self.document, layout_path)?;
        let dir = layout_path.parent().unwrap_or(Path::new("."));
        write_mesh(&self.placed_mesh, &layout_path.with_extension("obj"))?;
        if let (Some(pt), Some(cloud)) = (&self.document.pass_through, &self.pass_through) {
            write_point_cloud(cloud, &dir.join(&pt.cloud))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{FloorFrame, FloorModel};
    use crate::io::Instance;
    use nalgebra::Point3;

    fn room(w: f64, d: f64) -> RoomEnvelope {
        let contour = vec![Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w, d), Point2::new(0.0, d)];
        RoomEnvelope {
            floor: FloorModel {
                frame: FloorFrame::world(Point3::origin()),
                contour,
                area: w * d,
                dims: [w, d],
            },
            height: 2.5,
            volume: w * d * 2.5,
            clamped_heights: 0,
        }
    }

    /// Box of the given size whose pivot (surface centroid) lands at `center`.
    fn box_item(id: u32, size: [f64; 3], center: [f64; 3]) -> LayoutItem {
        let mesh = TriangleMesh::cuboid([0.0; 3], size);
        let model = Arc::new(CandidateModel::new(format!("box{id}"), "table", mesh, 600, id as u64).unwrap());
        let placement = Placement {
            model_id: model.id.clone(),
            category: "table".into(),
            scale: [1.0; 3],
            rotation_deg: 0.0,
            translation: Vector3::from(center),
            pivot: model.pivot,
            scale_axis_deg: model.scale_axis_deg,
            score: 0.0,
        };
        LayoutItem {
            instance_id: id,
            placement,
            model,
        }
    }

    fn unit_cube_item(id: u32, x: f64, y: f64, z: f64) -> LayoutItem {
        // exact box geometry: samples include the 8 corners
        let mut it = box_item(id, [1.0; 3], [x, y, z]);
        let mut m = (*it.model).clone();
        m.samples.points.extend(m.mesh.vertices.iter().copied());
        it.model = Arc::new(m);
        it
    }

    #[test]
    fn snapping() {
        let frame = FloorFrame::world(Point3::origin());
        for (z, shift) in [(0.8, -0.3), (0.4, 0.1), (0.5, 0.0)] {
            let it = unit_cube_item(1, 2.0, 1.5, z);
            let p = snap_to_floor(&it, &frame);
            assert!((p.translation.z - it.placement.translation.z - shift).abs() < 1e-6);
            assert_eq!(p.translation.xy(), it.placement.translation.xy());
        }
    }

    #[test]
    fn wall_penetration_depths() {
        let env = room(4.0, 3.0);
        let frame = env.floor.frame;
        assert_eq!(check_wall_penetration(&unit_cube_item(1, 2.0, 1.5, 0.5).obb(&frame), &env), 0.0);
        let obb = Obb::axis_aligned(Point3::new(3.7, 1.5, 0.5), [0.5; 3]);
        assert!((check_wall_penetration(&obb, &env) - 0.2).abs() < 1e-12);
        let touch = Obb::axis_aligned(Point3::new(3.5, 1.5, 0.5), [0.5; 3]);
        assert!(check_wall_penetration(&touch, &env) < 1e-9);
    }

    #[test]
    fn wall_penetration_matches_brute_force() {
        // oracle: corner-by-corner distance to the nearest edge
        let env = room(4.0, 3.0);
        let obb = Obb {
            center: Point3::new(0.1, 2.9, 0.3),
            axes: [
                Vector3::new(0.6, 0.8, 0.0),
                Vector3::new(-0.8, 0.6, 0.0),
                Vector3::z(),
            ],
            half_extents: [0.4, 0.2, 0.3],
        };
        let brute = obb
            .corners()
            .iter()
            .map(|c| {
                let (x, y) = (c.x, c.y);
                let dx = (-x).max(x - 4.0).max(0.0);
                let dy = (-y).max(y - 3.0).max(0.0);
                (dx * dx + dy * dy).sqrt()
            })
            .fold(0.0, f64::max);
        assert!((check_wall_penetration(&obb, &env) - brute).abs() < 1e-12);
    }

    #[test]
    fn overlapping_pair_separates_to_margin() {
        // 1-D oracle: centers 1.5 and 2.3 with width 1 overlap by 0.2; each moves 0.1005
        let layout = Layout::new(room(4.0, 3.0), vec![unit_cube_item(1, 1.5, 1.5, 0.5), unit_cube_item(2, 2.3, 1.5, 0.5)]);
        let (out, report) = resolve_layout(&layout, ResolveOptions::default());
        assert!(report.is_clean(), "{:?}", report.residuals);
        assert!(report.rounds() <= 3);
        let x1 = out.items[0].placement.translation.x;
        let x2 = out.items[1].placement.translation.x;
        assert!((x1 - 1.3995).abs() < 1e-9 && (x2 - 2.4005).abs() < 1e-9, "{x1} {x2}");
        assert!(((x2 - x1) - 1.001).abs() < 1e-9);
    }

    #[test]
    fn clean_layout_is_unchanged() {
        let layout = Layout::new(room(4.0, 3.0), vec![unit_cube_item(1, 1.0, 1.0, 0.5), unit_cube_item(2, 3.0, 2.0, 0.5)]);
        let (out, report) = resolve_layout(&layout, ResolveOptions::default());
        assert_eq!(report.violations_per_round, vec![0]);
        for (a, b) in out.items.iter().zip(&layout.items) {
            assert!((a.placement.translation - b.placement.translation).norm() < 1e-12);
        }
        let (again, _) = resolve_layout(&out, ResolveOptions::default());
        for (a, b) in again.items.iter().zip(&out.items) {
            assert!((a.placement.translation - b.placement.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn wall_penetration_is_pushed_inside() {
        let layout = Layout::new(room(4.0, 3.0), vec![unit_cube_item(1, 3.8, 2.9, 1.0)]);
        let (out, report) = resolve_layout(&layout, ResolveOptions::default());
        assert!(report.is_clean(), "{:?}", report.residuals);
        let obb = out.items[0].obb(&out.envelope.floor.frame);
        assert!(check_wall_penetration(&obb, &out.envelope) < 1e-6);
        assert!(out.items[0].min_height(&out.envelope.floor.frame).abs() < 1e-6);
    }

    #[test]
    fn too_wide_object_is_reported() {
        let layout = Layout::new(room(4.0, 3.0), vec![box_item(1, [5.0, 1.0, 1.0], [2.0, 1.5, 0.5])]);
        let (_, report) = resolve_layout(&layout, ResolveOptions::default());
        assert_eq!(report.rounds(), 100);
        assert!(matches!(report.residuals[0], Violation::WallPenetration { instance_id: 1, .. }));
    }

    fn three_item_scene() -> (Layout, SegmentedScene) {
        let items = vec![
            unit_cube_item(1, 0.7, 0.7, 0.5),
            unit_cube_item(2, 2.0, 0.7, 0.5),
            unit_cube_item(3, 3.3, 2.3, 0.5),
        ];
        let mut pts = Vec::new();
        let mut instances = Vec::new();
        for it in &items {
            let start = pts.len();
            pts.extend(it.placed_samples(&FloorFrame::world(Point3::origin())));
            instances.push(Instance { id: it.instance_id, label: "table".into(), indices: (start..pts.len()).collect() });
        }
        let scene = SegmentedScene { cloud: PointCloud::new(pts), instances, warnings: vec![] };
        (Layout::new(room(4.0, 3.0), items), scene)
    }

    #[test]
    fn output_modes() {
        let (layout, scene) = three_item_scene();
        let (layout, report) = resolve_layout(&layout, ResolveOptions::default());
        let v = finalize_layout(&layout, &report, &scene, OutputMode::Virtual, &[], Provenance::default(), "rest.ply").unwrap();
        assert_eq!(v.document.placements.len(), 3);
        assert!(v.document.pass_through.is_none());
        assert_eq!(v.placed_mesh.triangles.len(), 36);
        let h = finalize_layout(&layout, &report, &scene, OutputMode::Hybrid, &[2], Provenance::default(), "rest.ply").unwrap();
        assert_eq!(h.document.placements.len(), 1);
        assert_eq!(h.document.pass_through.as_ref().unwrap().instance_ids, vec![1, 3]);
        assert_eq!(h.pass_through.as_ref().unwrap().len(), scene.instances[0].indices.len() + scene.instances[2].indices.len());
        assert!(matches!(
            finalize_layout(&layout, &report, &scene, OutputMode::Hybrid, &[42], Provenance::default(), "rest.ply"),
            Err(ConstraintError::UnknownInstance(42))
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layout.json");
        h.write(&path).unwrap();
        assert!(dir.path().join("layout.obj").exists() && dir.path().join("rest.ply").exists());
        assert_eq!(crate::io::read_layout(&path).unwrap(), h.document);
    }
}
