use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;

use super::{instance_color, item_geometry, SceneSpec, SynthError, CEILING_ID, FIRST_FURNITURE_ID, FLOOR_ID, WALL_IDS};
use crate::geom::{RigidTransform, TriangleMesh};
use crate::io::{DepthFrame, Intrinsics, ModelDatabase};

/// Pinhole camera model shared by every frame of a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
}

impl Default for Camera {
    /// 320×240 with a 90° horizontal field of view.
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            intrinsics: Intrinsics {
                fx: 160.0,
                fy: 160.0,
                cx: 159.5,
                cy: 119.5,
            },
        }
    }
}

/// Camera-to-world pose at `eye` looking at `target` with image up along
/// `up` (camera +x right, +y down, +z forward).
pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> RigidTransform {
    let forward = (target - eye).normalize();
    let mut right = forward.cross(&up);
    if right.norm() < 1e-9 {
        right = forward.cross(&up.cross(&Vector3::x()).try_normalize(1e-9).unwrap_or(Vector3::y()));
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_columns(&[right, down, forward]);
    RigidTransform::from_parts(r, eye.coords).expect("look-at basis is orthonormal")
}

/// `n` views from a small circle around the room center at mid height,
/// turning a full circle and cycling the pitch through down, level and up
/// so floor, walls and ceiling are all seen.
pub fn orbit_path(spec: &SceneSpec, n: usize) -> Vec<RigidTransform> {
    let [l, w, h] = spec.room.dims;
    let pose = spec.room_pose();
    let up = pose.apply_vector(&Vector3::z());
    let radius = 0.15 * l.min(w);
    (0..n)
        .map(|i| {
            let yaw = std::f64::consts::TAU * i as f64 / n.max(1) as f64;
            let pitch = [-35.0f64, 0.0, 30.0][i % 3].to_radians();
            let eye = Point3::new(0.5 * l + radius * yaw.cos(), 0.5 * w + radius * yaw.sin(), 0.5 * h);
            let dir = Vector3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), pitch.sin());
            look_at(pose.apply_point(&eye), pose.apply_point(&(eye + dir)), up)
        })
        .collect()
}

/// Instance id of each quad of the room-shell cuboid, in face order.
const SHELL_FACE_IDS: [u32; 6] = [FLOOR_ID, CEILING_ID, WALL_IDS[0], WALL_IDS[2], WALL_IDS[3], WALL_IDS[1]];

struct Object {
    id: u32,
    mesh: TriangleMesh,
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Object {
    fn new(id: u32, mesh: TriangleMesh) -> Self {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &mesh.vertices {
            lo = lo.inf(&v.coords);
            hi = hi.sup(&v.coords);
        }
        Self { id, mesh, lo, hi }
    }

    /// Slab test against the padded bounding box.
    fn may_hit(&self, o: &Point3<f64>, d: &Vector3<f64>, t_max: f64) -> bool {
        let (mut t0, mut t1) = (0.0f64, t_max);
        for k in 0..3 {
            let inv = 1.0 / d[k];
            let (mut a, mut b) = ((self.lo[k] - 1e-9 - o[k]) * inv, (self.hi[k] + 1e-9 - o[k]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Möller–Trumbore; returns the ray parameter of the hit.
fn ray_triangle(o: &Point3<f64>, d: &Vector3<f64>, [a, b, c]: [Point3<f64>; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}

/// Ray-casts depth (distance along the optical axis) and flat instance
/// colors of the room and its furniture for each pose.
pub fn render_depth_sequence(
    spec: &SceneSpec,
    db: Option<&ModelDatabase>,
    camera: Camera,
    poses: &[RigidTransform],
) -> Result<Vec<DepthFrame>, SynthError> {
    spec.validate()?;
    camera.intrinsics.validate().map_err(SynthError::InvalidSpec)?;
    let [l, w, h] = spec.room.dims;
    let pose = spec.room_pose();
    let inv = pose.inverse();
    for (index, p) in poses.iter().enumerate() {
        let c = inv.apply_point(&Point3::from(p.translation));
        let inside = c.x > 0.0 && c.x < l && c.y > 0.0 && c.y < w && c.z > 0.0 && c.z < h;
        if !inside {
            let t = p.translation;
            return Err(SynthError::CameraOutsideRoom {
                index,
                position: [t.x, t.y, t.z],
            });
        }
    }
    // the room shell is one object; its id picks the wall color
    let mut objects = vec![Object::new(
        CEILING_ID + 100,
        TriangleMesh::cuboid([0.0; 3], [l, w, h]).map_vertices(|v| pose.apply_point(v)),
    )];
    for (i, f) in spec.furniture.iter().enumerate() {
        let g = item_geometry(f, db)?;
        objects.push(Object::new(FIRST_FURNITURE_ID + i as u32, g.mesh.map_vertices(|v| pose.apply_point(v))));
    }
    let k = camera.intrinsics;
    let frames = poses
        .par_iter()
        .map(|cam| {
            let o = Point3::from(cam.translation);
            let n = camera.width * camera.height;
            let mut depth = vec![0.0; n];
            let mut color = vec![[0u8; 3]; n];
            for v in 0..camera.height {
                for u in 0..camera.width {
                    let dc = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
                    let d = cam.rotation * dc;
                    let mut best = f64::INFINITY;
                    let mut hit = None;
                    for obj in &objects {
                        if !obj.may_hit(&o, &d, best) {
                            continue;
                        }
                        for t in 0..obj.mesh.triangles.len() {
                            if let Some(s) = ray_triangle(&o, &d, obj.mesh.triangle(t)) {
                                if s < best {
                                    best = s;
                                    hit = Some((obj.id, t));
                                }
                            }
                        }
                    }
                    if let Some((id, tri)) = hit {
                        let i = v * camera.width + u;
                        // optical-axis component of the unnormalized ray is 1
                        depth[i] = best;
                        let cid = if id == CEILING_ID + 100 { SHELL_FACE_IDS[tri / 2] } else { id };
                        color[i] = instance_color(cid).map(|c| (c * 255.0).round() as u8);
                    }
                }
            }
            DepthFrame {
                width: camera.width,
                height: camera.height,
                depth,
                color: Some(color),
                intrinsics: k,
                pose: *cam,
            }
        })
        .collect();
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_pixel_sees_wall_at_two_meters() {
        let spec = SceneSpec::box_room([4.0, 3.0, 2.5]);
        let cam = Camera {
            width: 5,
            height: 5,
            intrinsics: Intrinsics { fx: 4.0, fy: 4.0, cx: 2.0, cy: 2.0 },
        };
        // facing the x = 4 wall from x = 2
        let pose = look_at(Point3::new(2.0, 1.5, 1.2), Point3::new(3.0, 1.5, 1.2), Vector3::z());
        let f = render_depth_sequence(&spec, None, cam, &[pose]).unwrap();
        assert!((f[0].depth_at(2, 2) - 2.0).abs() < 1e-12);
        // off-center pixels still hit the plane x = 4
        let p = f[0].back_project(0, 0).unwrap();
        assert!((p.x - 4.0).abs() < 1e-9);
    }

    #[test]
    fn camera_outside_room() {
        let spec = SceneSpec::box_room([4.0, 3.0, 2.5]);
        let mut path = orbit_path(&spec, 4);
        path.push(look_at(Point3::new(5.0, 1.0, 1.0), Point3::new(2.0, 1.0, 1.0), Vector3::z()));
        assert!(matches!(
            render_depth_sequence(&spec, None, Camera::default(), &path),
            Err(SynthError::CameraOutsideRoom { index: 4, .. })
        ));
    }

    #[test]
    fn look_at_frame_conventions() {
        let p = look_at(Point3::origin(), Point3::new(1.0, 0.0, 0.0), Vector3::z());
        assert!((p.apply_vector(&Vector3::z()) - Vector3::x()).norm() < 1e-12);
        assert!((p.apply_vector(&Vector3::y()) + Vector3::z()).norm() < 1e-12);
        assert!((p.apply_vector(&Vector3::x()) + Vector3::y()).norm() < 1e-12);
    }
}
