use nalgebra::{Point3, Vector3};

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(lo: [f64; 3], hi: [f64; 3]) -> Self {
        let vertices = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { lo[0] } else { hi[0] },
                    if i & 2 == 0 { lo[1] } else { hi[1] },
                    if i & 4 == 0 { lo[2] } else { hi[2] },
                )
            })
            .collect();
        let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Self::new(vertices, triangles)
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        self.triangles[i].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    /// Indices of zero-area triangles.
    pub fn degenerate_triangles(&self) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&i| self.triangle_area(i) <= 0.0)
            .collect()
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|v| v + base)));
    }

    /// Area-weighted surface centroid and second moment about the origin,
    /// integrated exactly over the triangles.
    pub fn surface_moments(&self) -> Option<(Point3<f64>, nalgebra::Matrix3<f64>, f64)> {
        let mut area = 0.0;
        let mut first = Vector3::zeros();
        let mut second = nalgebra::Matrix3::zeros();
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(i);
            let ar = self.triangle_area(i);
            if ar <= 0.0 {
                continue;
            }
            let s = a.coords + b.coords + c.coords;
            area += ar;
            first += s * (ar / 3.0);
            second += (a.coords * a.coords.transpose()
                + b.coords * b.coords.transpose()
                + c.coords * c.coords.transpose()
                + s * s.transpose())
                * (ar / 12.0);
        }
        if area <= 0.0 {
            return None;
        }
        Some((Point3::from(first / area), second / area, area))
    }
}
