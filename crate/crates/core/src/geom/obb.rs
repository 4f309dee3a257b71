use nalgebra::{Point3, Vector3};

/// Oriented bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Point3<f64>,
    pub axes: [Vector3<f64>; 3],
    pub half_extents: [f64; 3],
}

impl Obb {
    pub fn axis_aligned(center: Point3<f64>, half_extents: [f64; 3]) -> Self {
        Self {
            center,
            axes: [Vector3::x(), Vector3::y(), Vector3::z()],
            half_extents,
        }
    }

    /// Tightest box with the given orthonormal axes around `points`.
    /// Returns `None` for an empty slice.
    pub fn fit_with_axes(points: &[Point3<f64>], axes: [Vector3<f64>; 3]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                let s = p.coords.dot(&axes[k]);
                lo[k] = lo[k].min(s);
                hi[k] = hi[k].max(s);
            }
        }
        let mid: Vector3<f64> = (0..3).map(|k| axes[k] * 0.5 * (lo[k] + hi[k])).sum();
        Some(Self {
            center: Point3::from(mid),
            axes,
            half_extents: [0, 1, 2].map(|k| 0.5 * (hi[k] - lo[k])),
        })
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let mut out = [self.center; 8];
        for (i, c) in out.iter_mut().enumerate() {
            for k in 0..3 {
                let sign = if i >> k & 1 == 1 { 1.0 } else { -1.0 };
                *c += self.axes[k] * (sign * self.half_extents[k]);
            }
        }
        out
    }

    /// Half-length of the box's shadow on `dir` (scaled by `|dir|`).
    pub fn projection_radius(&self, dir: &Vector3<f64>) -> f64 {
        (0..3)
            .map(|k| self.half_extents[k] * self.axes[k].dot(dir).abs())
            .sum()
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            center: self.center + offset,
            ..*self
        }
    }

    pub fn overlaps(&self, other: &Obb) -> bool {
        obb_overlap(self, other)
    }
}

/// Separating-axis test over the 3 + 3 face normals and 9 edge cross
/// products. Touching boxes count as overlapping.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let t = b.center - a.center;
    let separated_on = |axis: &Vector3<f64>| {
        let dist = t.dot(axis).abs();
        dist > a.projection_radius(axis) + b.projection_radius(axis)
    };
    for axis in a.axes.iter().chain(b.axes.iter()) {
        if separated_on(axis) {
            return false;
        }
    }
    for ea in &a.axes {
        for eb in &b.axes {
            let axis = ea.cross(eb);
            // parallel edges: covered by the face normals
            if axis.norm_squared() < 1e-12 {
                continue;
            }
            if separated_on(&axis) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn unit_at(x: f64) -> Obb {
        Obb::axis_aligned(Point3::new(x, 0.0, 0.0), [0.5; 3])
    }

    #[test]
    fn examples() {
        assert!(obb_overlap(&unit_at(0.0), &unit_at(0.0)));
        assert!(!obb_overlap(&unit_at(0.0), &unit_at(3.0)));
        // oracle: per-axis interval overlap [-0.5,0.5] vs [0,1]
        assert!(obb_overlap(&unit_at(0.0), &unit_at(0.5)));
        assert!(obb_overlap(&unit_at(0.0), &unit_at(1.0)));
        assert!(!obb_overlap(&unit_at(0.0), &unit_at(1.0 + 1e-9)));
    }

    #[test]
    fn edge_edge_separation() {
        // Two boxes rotated 45° so that only an edge cross product separates them.
        let r1 = Rotation3::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        let r2 = Rotation3::from_euler_angles(std::f64::consts::FRAC_PI_4, 0.0, 0.0);
        let a = Obb {
            center: Point3::origin(),
            axes: [0, 1, 2].map(|k| r1 * Vector3::ith(k, 1.0)),
            half_extents: [0.5; 3],
        };
        let b = Obb {
            center: Point3::new(0.72, 0.72, 0.0),
            axes: [0, 1, 2].map(|k| r2 * Vector3::ith(k, 1.0)),
            half_extents: [0.5; 3],
        };
        // brute force: sample b's volume densely and check containment in a
        let inside = |p: &Point3<f64>| {
            (0..3).all(|k| (p - a.center).dot(&a.axes[k]).abs() <= 0.5)
        };
        let mut any = false;
        let n = 24;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let s = [i, j, k].map(|v| v as f64 / n as f64 - 0.5);
                    let p = b.center + b.axes[0] * s[0] + b.axes[1] * s[1] + b.axes[2] * s[2];
                    any |= inside(&p);
                }
            }
        }
        assert_eq!(obb_overlap(&a, &b), any);
    }

    #[test]
    fn corners_lie_on_box() {
        let b = Obb::axis_aligned(Point3::new(1.0, 2.0, 3.0), [0.5, 1.0, 2.0]);
        let c = b.corners();
        assert!(c.contains(&Point3::new(0.5, 1.0, 1.0)));
        assert!(c.contains(&Point3::new(1.5, 3.0, 5.0)));
    }

    proptest! {
        #[test]
        fn symmetric(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, bx in -2.0..2.0f64, by in -2.0..2.0f64,
            ra in 0.0..6.3f64, rb in 0.0..6.3f64, tilt in -0.5..0.5f64,
            ha in (0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64),
            hb in (0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64),
        ) {
            let ra = Rotation3::from_euler_angles(tilt, 0.0, ra);
            let rb = Rotation3::from_euler_angles(0.0, tilt, rb);
            let a = Obb { center: Point3::new(ax, ay, 0.0), axes: [0, 1, 2].map(|k| ra * Vector3::ith(k, 1.0)), half_extents: [ha.0, ha.1, ha.2] };
            let b = Obb { center: Point3::new(bx, by, 0.2), axes: [0, 1, 2].map(|k| rb * Vector3::ith(k, 1.0)), half_extents: [hb.0, hb.1, hb.2] };
            prop_assert_eq!(obb_overlap(&a, &b), obb_overlap(&b, &a));
        }
    }
}
