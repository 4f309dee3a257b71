//! Synthetic rooms with exact ground truth: labeled scans, rendered depth
//! sequences and a procedural furniture catalog.

mod catalog;
mod render;

use std::path::Path;

use nalgebra::{Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::FloorFrame;
use crate::geom::{GeomError, Obb, PointCloud, RigidTransform, TriangleMesh};
use crate::io::{FormatError, Instance, ModelDatabase, SegmentedScene};
use crate::registration::{sample_surface, CandidateModel, Placement};

pub use catalog::{generate_model_database, CATALOG_CATEGORIES};
pub use render::{look_at, orbit_path, render_depth_sequence, Camera};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("camera {index} at {position:?} is outside the room")]
    CameraOutsideRoom { index: usize, position: [f64; 3] },
    #[error("model {0:?} is not in the database")]
    UnknownModel(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Rigid pose as axis, angle and translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default = "z_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub translation: [f64; 3],
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            axis: z_axis(),
            angle_deg: 0.0,
            translation: [0.0; 3],
        }
    }
}

impl PoseSpec {
    pub fn transform(&self) -> RigidTransform {
        let mut t = RigidTransform::from_axis_angle(&Vector3::from(self.axis), self.angle_deg.to_radians());
        t.translation = Vector3::from(self.translation);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// Length (x), width (y) and height (z) of the room in its own frame.
    pub dims: [f64; 3],
    /// Room-to-world pose.
    #[serde(default)]
    pub pose: PoseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// Box of the given size, bottom face on the floor.
    Box { size: [f64; 3] },
    /// Upright closed-top cylinder.
    Cylinder { radius: f64, height: f64 },
    /// Catalog model, resting on the floor.
    Model { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FurnitureSpec {
    pub category: String,
    pub shape: Shape,
    /// Floor position in room coordinates: box or cylinder center, or the
    /// model's pivot.
    pub position: [f64; 2],
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default = "unit_scale")]
    pub scale: [f64; 3],
}

fn unit_scale() -> [f64; 3] {
    [1.0; 3]
}

fn default_spacing() -> f64 {
    0.05
}

/// Room, furniture, noise and sampling for one synthetic scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub room: RoomSpec,
    #[serde(default)]
    pub furniture: Vec<FurnitureSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Outliers per inlier point.
    #[serde(default)]
    pub outlier_fraction: f64,
    /// Grid spacing on room surfaces; furniture gets one sample per
    /// `spacing²` of surface.
    #[serde(default = "default_spacing")]
    pub point_spacing: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn box_room(dims: [f64; 3]) -> Self {
        Self {
            room: RoomSpec {
                dims,
                pose: PoseSpec::default(),
            },
            furniture: Vec::new(),
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            point_spacing: default_spacing(),
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text).map_err(|e| SynthError::InvalidSpec(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self, SynthError> {
        let text = crate::io::read_text(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            SynthError::InvalidSpec(m) => SynthError::InvalidSpec(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.room.dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad(format!("room dims must be positive, got {:?}", self.room.dims));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad(format!("outlier fraction must lie in [0, 1), got {}", self.outlier_fraction));
        }
        if !(self.point_spacing > 0.0 && self.point_spacing.is_finite()) {
            return bad(format!("point spacing must be positive, got {}", self.point_spacing));
        }
        if Vector3::from(self.room.pose.axis).norm() < 1e-12 {
            return bad("room pose axis is zero".into());
        }
        for (i, f) in self.furniture.iter().enumerate() {
            if f.scale.iter().any(|s| !(*s > 0.0)) {
                return bad(format!("furniture {i}: scale must be positive"));
            }
            let ok = match &f.shape {
                Shape::Box { size } => size.iter().all(|s| *s > 0.0),
                Shape::Cylinder { radius, height } => *radius > 0.0 && *height > 0.0,
                Shape::Model { .. } => true,
            };
            if !ok {
                return bad(format!("furniture {i}: shape dimensions must be positive"));
            }
        }
        Ok(())
    }

    pub fn room_pose(&self) -> RigidTransform {
        self.room.pose.transform()
    }

    /// Floor frame of the room in world coordinates (origin at the room
    /// corner).
    pub fn floor_frame(&self) -> FloorFrame {
        let pose = self.room_pose();
        FloorFrame {
            origin: pose.apply_point(&Point3::origin()),
            f1: pose.apply_vector(&Vector3::x()),
            f2: pose.apply_vector(&Vector3::y()),
            normal: pose.apply_vector(&Vector3::z()),
        }
    }
}

/// Instance ids of the structural parts.
pub const FLOOR_ID: u32 = 1;
pub const WALL_IDS: [u32; 4] = [2, 3, 4, 5];
/// The ceiling is labeled as a wall; segmenters with only
/// wall/floor/furniture classes merge it into the walls.
pub const CEILING_ID: u32 = 6;
pub const FIRST_FURNITURE_ID: u32 = 10;

/// Known answer for one furniture item.
#[derive(Debug, Clone)]
pub struct FurnitureTruth {
    pub instance_id: u32,
    pub category: String,
    /// World-space mesh of the item.
    pub mesh: TriangleMesh,
    pub obb: Obb,
    /// Exact pose for catalog models, relative to [`GroundTruth::floor_frame`].
    pub placement: Option<Placement>,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub area: f64,
    pub height: f64,
    pub volume: f64,
    pub room_pose: RigidTransform,
    pub floor_frame: FloorFrame,
    pub furniture: Vec<FurnitureTruth>,
    pub inliers: usize,
    pub outliers: usize,
}

/// Serializable digest of the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSummary {
    pub area: f64,
    pub height: f64,
    pub volume: f64,
    pub inliers: usize,
    pub outliers: usize,
    pub furniture: Vec<FurnitureSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureSummary {
    pub instance_id: u32,
    pub category: String,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<crate::io::PlacementRecord>,
}

impl GroundTruth {
    pub fn summary(&self) -> GroundTruthSummary {
        GroundTruthSummary {
            area: self.area,
            height: self.height,
            volume: self.volume,
            inliers: self.inliers,
            outliers: self.outliers,
            furniture: self
                .furniture
                .iter()
                .map(|f| FurnitureSummary {
                    instance_id: f.instance_id,
                    category: f.category.clone(),
                    center: [f.obb.center.x, f.obb.center.y, f.obb.center.z],
                    half_extents: f.obb.half_extents,
                    placement: f.placement.as_ref().map(|p| p.to_record(f.instance_id)),
                })
                .collect(),
        }
    }
}

/// Evenly spaced values from `0` to `len` inclusive, endpoints exact.
fn grid(len: f64, spacing: f64) -> Vec<f64> {
    let n = (len / spacing).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| if i == n { len } else { len * i as f64 / n as f64 })
        .collect()
}

/// Room-frame points of the six room faces with their instance ids.
fn room_surfaces(dims: [f64; 3], spacing: f64) -> Vec<(u32, Vec<Point3<f64>>)> {
    let [l, w, h] = dims;
    let (gx, gy, gz) = (grid(l, spacing), grid(w, spacing), grid(h, spacing));
    let plane = |a: &[f64], b: &[f64], f: &dyn Fn(f64, f64) -> Point3<f64>| -> Vec<Point3<f64>> {
        a.iter().flat_map(|&u| b.iter().map(move |&v| (u, v))).map(|(u, v)| f(u, v)).collect()
    };
    vec![
        (FLOOR_ID, plane(&gx, &gy, &|x, y| Point3::new(x, y, 0.0))),
        (WALL_IDS[0], plane(&gx, &gz, &|x, z| Point3::new(x, 0.0, z))),
        (WALL_IDS[1], plane(&gy, &gz, &|y, z| Point3::new(l, y, z))),
        (WALL_IDS[2], plane(&gx, &gz, &|x, z| Point3::new(x, w, z))),
        (WALL_IDS[3], plane(&gy, &gz, &|y, z| Point3::new(0.0, y, z))),
        (CEILING_ID, plane(&gx, &gy, &|x, y| Point3::new(x, y, h))),
    ]
}

const PALETTE: [[f64; 3]; 8] = [
    [0.55, 0.45, 0.35],
    [0.85, 0.85, 0.8],
    [0.8, 0.8, 0.75],
    [0.82, 0.8, 0.78],
    [0.78, 0.8, 0.82],
    [0.95, 0.95, 0.95],
    [0.6, 0.2, 0.2],
    [0.2, 0.4, 0.6],
];

fn instance_color(id: u32) -> [f64; 3] {
    PALETTE[(id as usize) % PALETTE.len()]
}

/// Room-frame geometry of one furniture item: a mesh and (for catalog
/// models) the exact placement in the room frame.
struct ItemGeometry {
    mesh: TriangleMesh,
    /// Surface used for sampling; boxes and cylinders omit the hidden bottom.
    sample_mesh: Option<TriangleMesh>,
    cylinder: Option<(Point3<f64>, f64, f64)>,
    placement: Option<Placement>,
    axis_deg: f64,
}

fn cylinder_mesh(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let mut v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, height)];
    for i in 0..segments {
        let a = std::f64::consts::TAU * i as f64 / segments as f64;
        let (x, y) = (radius * a.cos(), radius * a.sin());
        v.push(Point3::new(x, y, 0.0));
        v.push(Point3::new(x, y, height));
    }
    let mut t = Vec::new();
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (b0, t0, b1, t1) = (2 + 2 * i, 3 + 2 * i, 2 + 2 * j, 3 + 2 * j);
        t.push([b0, b1, t1]);
        t.push([b0, t1, t0]);
        t.push([1, t0, t1]);
        t.push([0, b1, b0]);
    }
    TriangleMesh::new(v, t)
}

fn item_geometry(f: &FurnitureSpec, db: Option<&ModelDatabase>) -> Result<ItemGeometry, SynthError> {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), f.rotation_deg.to_radians());
    let base = Vector3::new(f.position[0], f.position[1], 0.0);
    let place = |m: &TriangleMesh| m.map_vertices(|p| Point3::from(base + rot * p.coords));
    match &f.shape {
        Shape::Box { size } => {
            let s = [0, 1, 2].map(|k| size[k] * f.scale[k]);
            let local = TriangleMesh::cuboid([-s[0] / 2.0, -s[1] / 2.0, 0.0], [s[0] / 2.0, s[1] / 2.0, s[2]]);
            let mut open = local.clone();
            // bottom face is the first quad
            open.triangles.drain(0..2);
            Ok(ItemGeometry {
                mesh: place(&local),
                sample_mesh: Some(place(&open)),
                cylinder: None,
                placement: None,
                axis_deg: f.rotation_deg,
            })
        }
        Shape::Cylinder { radius, height } => {
            let r = radius * f.scale[0];
            let h = height * f.scale[2];
            Ok(ItemGeometry {
                mesh: place(&cylinder_mesh(r, h, 48)),
                sample_mesh: None,
                cylinder: Some((Point3::from(base), r, h)),
                placement: None,
                axis_deg: f.rotation_deg,
            })
        }
        Shape::Model { id } => {
            let db = db.ok_or_else(|| SynthError::UnknownModel(id.clone()))?;
            let entry = db.entry(id).ok_or_else(|| SynthError::UnknownModel(id.clone()))?;
            let mesh = db.load_mesh(entry)?;
            let model = CandidateModel::new(id.clone(), f.category.clone(), mesh, 1, 0)
                .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
            let frame = FloorFrame::world(Point3::origin());
            let mut placement = Placement {
                model_id: id.clone(),
                category: f.category.clone(),
                scale: f.scale,
                rotation_deg: f.rotation_deg.rem_euclid(360.0),
                translation: base,
                pivot: model.pivot,
                scale_axis_deg: model.scale_axis_deg,
                score: 0.0,
            };
            let lowest = placement
                .transform_points(&frame, &model.mesh.vertices)
                .iter()
                .map(|p| p.z)
                .fold(f64::INFINITY, f64::min);
            placement.translation.z -= lowest;
            let placed = model.mesh.map_vertices(|p| placement.apply(&frame, p));
            Ok(ItemGeometry {
                sample_mesh: Some(placed.clone()),
                mesh: placed,
                cylinder: None,
                axis_deg: f.rotation_deg + model.scale_axis_deg,
                placement: Some(placement),
            })
        }
    }
}

fn sample_cylinder(center: Point3<f64>, r: f64, h: f64, n: usize, rng: &mut impl Rng) -> Vec<Point3<f64>> {
    let side = std::f64::consts::TAU * r * h;
    let top = std::f64::consts::PI * r * r;
    (0..n)
        .map(|_| {
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            if rng.random::<f64>() * (side + top) < side {
                center + Vector3::new(r * a.cos(), r * a.sin(), rng.random::<f64>() * h)
            } else {
                let rr = r * rng.random::<f64>().sqrt();
                center + Vector3::new(rr * a.cos(), rr * a.sin(), h)
            }
        })
        .collect()
}

/// Samples the scene described by `spec`. Catalog-model furniture needs
/// `db`.
///
/// Room faces are sampled on regular grids that include their edges;
/// furniture surfaces are sampled uniformly by area. Every inlier gets
/// isotropic Gaussian noise; then `round(outlier_fraction · inliers)`
/// outliers are drawn uniformly in the room volume, each joining the
/// instance of a uniformly chosen inlier.
pub fn generate_scene(spec: &SceneSpec, db: Option<&ModelDatabase>) -> Result<(SegmentedScene, GroundTruth), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [l, w, h] = spec.room.dims;
    let pose = spec.room_pose();
    let frame = spec.floor_frame();

    let mut parts: Vec<(u32, String, Vec<Point3<f64>>)> = room_surfaces(spec.room.dims, spec.point_spacing)
        .into_iter()
        .map(|(id, pts)| (id, if id == FLOOR_ID { "floor" } else { "wall" }.to_string(), pts))
        .collect();

    let density = 1.0 / (spec.point_spacing * spec.point_spacing);
    let mut truths = Vec::new();
    for (i, f) in spec.furniture.iter().enumerate() {
        let id = FIRST_FURNITURE_ID + i as u32;
        let g = item_geometry(f, db)?;
        for p in &g.mesh.vertices {
            let inside = (-1e-9..=l + 1e-9).contains(&p.x) && (-1e-9..=w + 1e-9).contains(&p.y) && p.z <= h + 1e-9;
            if !inside {
                return Err(SynthError::InvalidSpec(format!("furniture {i} ({}) does not fit in the room", f.category)));
            }
        }
        let pts = match (&g.sample_mesh, g.cylinder) {
            (Some(m), _) => sample_surface(m, ((m.surface_area() * density).round() as usize).max(16), &mut rng).points,
            (None, Some((c, r, hh))) => {
                let area = std::f64::consts::TAU * r * hh + std::f64::consts::PI * r * r;
                sample_cylinder(c, r, hh, ((area * density).round() as usize).max(16), &mut rng)
            }
            (None, None) => unreachable!("every shape has a sampling surface"),
        };
        let world_mesh = g.mesh.map_vertices(|p| pose.apply_point(p));
        let a = g.axis_deg.to_radians();
        let axes = [
            pose.apply_vector(&Vector3::new(a.cos(), a.sin(), 0.0)),
            pose.apply_vector(&Vector3::new(-a.sin(), a.cos(), 0.0)),
            frame.normal,
        ];
        let obb = Obb::fit_with_axes(&world_mesh.vertices, axes).expect("furniture mesh has vertices");
        let placement = g.placement.map(|mut p| {
            p.translation = pose.apply_point(&Point3::from(p.translation)).coords;
            p
        });
        truths.push(FurnitureTruth {
            instance_id: id,
            category: f.category.clone(),
            mesh: world_mesh,
            obb,
            placement,
        });
        parts.push((id, f.category.clone(), pts));
    }

    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma is finite"));
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut instances: Vec<Instance> = Vec::new();
    for (id, label, pts) in &parts {
        let start = points.len();
        for p in pts {
            let mut q = *p;
            if let Some(n) = &noise {
                q += Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            }
            points.push(pose.apply_point(&q));
            colors.push(instance_color(*id));
        }
        instances.push(Instance {
            id: *id,
            label: label.clone(),
            indices: (start..points.len()).collect(),
        });
    }
    let inliers = points.len();
    let outliers = (spec.outlier_fraction * inliers as f64).round() as usize;
    let mut owner_of = Vec::with_capacity(inliers);
    for (k, inst) in instances.iter().enumerate() {
        owner_of.extend(std::iter::repeat_n(k, inst.indices.len()));
    }
    for _ in 0..outliers {
        let owner = owner_of[rng.random_range(0..inliers)];
        let q = Point3::new(rng.random::<f64>() * l, rng.random::<f64>() * w, rng.random::<f64>() * h);
        instances[owner].indices.push(points.len());
        points.push(pose.apply_point(&q));
        colors.push(instance_color(instances[owner].id));
    }
    instances.sort_by_key(|i| i.id);
    let scene = SegmentedScene {
        cloud: PointCloud {
            points,
            colors: Some(colors),
        },
        instances,
        warnings: Vec::new(),
    };
    let truth = GroundTruth {
        area: l * w,
        height: h,
        volume: l * w * h,
        room_pose: pose,
        floor_frame: frame,
        furniture: truths,
        inliers,
        outliers,
    };
    Ok((scene, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::build_envelope;

    fn posed_spec() -> SceneSpec {
        let mut s = SceneSpec::box_room([4.0, 3.0, 2.5]);
        s.room.pose = PoseSpec {
            axis: [0.2, -0.4, 1.0],
            angle_deg: 33.0,
            translation: [1.0, -2.0, 0.5],
        };
        s.furniture.push(FurnitureSpec {
            category: "table".into(),
            shape: Shape::Box { size: [1.2, 0.8, 0.75] },
            position: [2.0, 1.5],
            rotation_deg: 20.0,
            scale: [1.0; 3],
        });
        s.furniture.push(FurnitureSpec {
            category: "stool".into(),
            shape: Shape::Cylinder { radius: 0.2, height: 0.45 },
            position: [0.6, 0.6],
            rotation_deg: 0.0,
            scale: [1.0; 3],
        });
        s
    }

    #[test]
    fn noiseless_box_room_truth_and_envelope() {
        let (scene, truth) = generate_scene(&SceneSpec::box_room([4.0, 3.0, 2.5]), None).unwrap();
        assert_eq!((truth.area, truth.height, truth.volume), (12.0, 2.5, 30.0));
        let env = build_envelope(&scene).unwrap();
        assert!((env.floor.area / 12.0 - 1.0).abs() < 1e-6);
        assert!((env.height / 2.5 - 1.0).abs() < 1e-6);
        assert!((env.volume / 30.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noiseless_points_are_on_their_surfaces() {
        let spec = posed_spec();
        let (scene, truth) = generate_scene(&spec, None).unwrap();
        let inv = truth.room_pose.inverse();
        let [l, w, h] = spec.room.dims;
        for inst in &scene.instances {
            for &i in &inst.indices {
                let p = inv.apply_point(&scene.cloud.points[i]);
                let r = match inst.id {
                    FLOOR_ID => p.z.abs(),
                    2 => p.y.abs(),
                    3 => (p.x - l).abs(),
                    4 => (p.y - w).abs(),
                    5 => p.x.abs(),
                    CEILING_ID => (p.z - h).abs(),
                    11 => {
                        let rad = ((p.x - 0.6).powi(2) + (p.y - 0.6).powi(2)).sqrt();
                        (rad - 0.2).abs().min((p.z - 0.45).abs())
                    }
                    _ => continue,
                };
                assert!(r < 1e-12, "instance {} residual {r}", inst.id);
            }
        }
    }

    #[test]
    fn labels_partition_the_cloud() {
        let (scene, _) = generate_scene(&posed_spec(), None).unwrap();
        let mut seen = vec![false; scene.cloud.len()];
        for inst in &scene.instances {
            for &i in &inst.indices {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let mut spec = posed_spec();
        spec.noise_sigma = 0.01;
        spec.outlier_fraction = 0.02;
        spec.seed = 5;
        let (a, _) = generate_scene(&spec, None).unwrap();
        let (b, _) = generate_scene(&spec, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outlier_count() {
        let mut spec = posed_spec();
        spec.noise_sigma = 0.01;
        spec.outlier_fraction = 0.02;
        let (scene, truth) = generate_scene(&spec, None).unwrap();
        assert_eq!(truth.outliers, (0.02 * truth.inliers as f64).round() as usize);
        assert_eq!(scene.cloud.len(), truth.inliers + truth.outliers);
    }

    #[test]
    fn invalid_specs() {
        let mut s = SceneSpec::box_room([4.0, 0.0, 2.5]);
        assert!(matches!(generate_scene(&s, None), Err(SynthError::InvalidSpec(_))));
        s = SceneSpec::box_room([4.0, 3.0, 2.5]);
        s.outlier_fraction = 1.0;
        assert!(generate_scene(&s, None).is_err());
        s.outlier_fraction = 0.0;
        s.furniture.push(FurnitureSpec {
            category: "bed".into(),
            shape: Shape::Box { size: [2.0, 2.0, 0.5] },
            position: [3.5, 1.5],
            rotation_deg: 0.0,
            scale: [1.0; 3],
        });
        assert!(matches!(generate_scene(&s, None), Err(SynthError::InvalidSpec(_))));
        assert!(SceneSpec::from_toml("room = { dims = [1, 2, 3] }\nbogus = 1\n").is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = posed_spec();
        assert_eq!(SceneSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let s = SceneSpec::from_toml(
            "seed = 3\n[room]\ndims = [4, 3, 2.5]\n[[furniture]]\ncategory = \"chair\"\nposition = [1, 1]\nshape = { kind = \"model\", id = \"chair-000\" }\n",
        )
        .unwrap();
        assert_eq!(s.furniture[0].shape, Shape::Model { id: "chair-000".into() });
        assert!(matches!(generate_scene(&s, None), Err(SynthError::UnknownModel(_))));
    }
}
