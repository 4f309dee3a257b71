use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use nalgebra::{Matrix4, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes, FormatError};
use crate::geom::{PointCloud, RigidTransform};

/// Raw 16-bit depth units per meter (TUM RGB-D convention).
pub const DEFAULT_DEPTH_SCALE: f64 = 5000.0;

/// Deviation of a quaternion's norm from 1 above which a warning is logged.
const QUATERNION_WARN_TOL: f64 = 1e-3;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(format!("focal lengths must be positive, got ({}, {})", self.fx, self.fy));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err("principal point must be finite".into());
        }
        Ok(())
    }
}

/// One posed depth image. The pose maps camera coordinates (+x right,
/// +y down, +z forward) to world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major depths in meters; 0 marks an invalid pixel.
    pub depth: Vec<f64>,
    pub color: Option<Vec<[u8; 3]>>,
    pub intrinsics: Intrinsics,
    pub pose: RigidTransform,
}

impl DepthFrame {
    pub fn depth_at(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }

    /// World position of pixel `(u, v)`, or `None` for invalid depth.
    pub fn back_project(&self, u: usize, v: usize) -> Option<Point3<f64>> {
        let d = self.depth_at(u, v);
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let k = &self.intrinsics;
        let cam = Point3::new((u as f64 - k.cx) * d / k.fx, (v as f64 - k.cy) * d / k.fy, d);
        Some(self.pose.apply_point(&cam))
    }

    /// All valid pixels back-projected to world space.
    pub fn to_point_cloud(&self) -> PointCloud {
        let mut points = Vec::new();
        let mut colors = Vec::new();
        for v in 0..self.height {
            for u in 0..self.width {
                if let Some(p) = self.back_project(u, v) {
                    points.push(p);
                    if let Some(c) = &self.color {
                        colors.push(c[v * self.width + u].map(|x| x as f64 / 255.0));
                    }
                }
            }
        }
        PointCloud {
            points,
            colors: self.color.as_ref().map(|_| colors),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("frame must be at least 1×1".into());
        }
        if self.depth.len() != self.width * self.height {
            return Err("depth buffer size does not match frame dimensions".into());
        }
        if self.depth.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err("depths must be finite and non-negative".into());
        }
        self.intrinsics.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth_scale: Option<f64>,
    /// Default intrinsics for frames that do not carry their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intrinsics: Option<Intrinsics>,
    #[serde(default)]
    frame: Vec<FrameEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameEntry {
    depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intrinsics: Option<Intrinsics>,
    /// `[qx, qy, qz, qw]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quaternion: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    translation: Option<[f64; 3]>,
    /// Row-major camera-to-world matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<[[f64; 4]; 4]>,
}

pub fn read_frame_manifest(path: &Path) -> Result<Vec<DepthFrame>, FormatError> {
    read_frame_manifest_with(path, None)
}

/// Reads a frame manifest. `depth_scale_override` wins over the manifest's
/// own `depth_scale`, which defaults to [`DEFAULT_DEPTH_SCALE`].
pub fn read_frame_manifest_with(
    path: &Path,
    depth_scale_override: Option<f64>,
) -> Result<Vec<DepthFrame>, FormatError> {
    let text = read_text(path)?;
    let manifest: ManifestFile = toml::from_str(&text).map_err(|e| {
        let loc = e
            .span()
            .map(|s| format!("line {}", text[..s.start].matches('\n').count() + 1))
            .unwrap_or_else(|| "document".into());
        FormatError::parse(path, loc, e.message().to_string())
    })?;
    let scale = depth_scale_override
        .or(manifest.depth_scale)
        .unwrap_or(DEFAULT_DEPTH_SCALE);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(FormatError::parse(path, "depth_scale", format!("must be positive, got {scale}")));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut frames = Vec::with_capacity(manifest.frame.len());
    for (i, entry) in manifest.frame.iter().enumerate() {
        let loc = format!("frame {i}");
        let intrinsics = entry
            .intrinsics
            .or(manifest.intrinsics)
            .ok_or_else(|| FormatError::parse(path, &loc, "no intrinsics"))?;
        intrinsics
            .validate()
            .map_err(|m| FormatError::parse(path, &loc, m))?;
        let pose = frame_pose(path, i, entry)?;
        let depth_path = base.join(&entry.depth);
        let (width, height, depth) = read_depth_png(&depth_path, scale)?;
        let color = match &entry.color {
            Some(c) => {
                let cp = base.join(c);
                let img = open_image(&cp)?.into_rgb8();
                if img.width() as usize != width || img.height() as usize != height {
                    return Err(FormatError::parse(
                        path,
                        &loc,
                        "color image size differs from depth image",
                    ));
                }
                Some(img.pixels().map(|p| p.0).collect())
            }
            None => None,
        };
        frames.push(DepthFrame {
            width,
            height,
            depth,
            color,
            intrinsics,
            pose,
        });
    }
    Ok(frames)
}

fn frame_pose(path: &Path, i: usize, entry: &FrameEntry) -> Result<RigidTransform, FormatError> {
    let loc = format!("frame {i}");
    match (entry.matrix, entry.quaternion) {
        (Some(m), None) => {
            let m = Matrix4::from_row_slice(&m.concat());
            RigidTransform::from_matrix4(&m).map_err(|e| FormatError::parse(path, &loc, e.to_string()))
        }
        (None, Some(q)) => {
            let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !norm.is_finite() || norm < 1e-6 {
                return Err(FormatError::NonNormalizedQuaternion { frame: i, norm });
            }
            if (norm - 1.0).abs() > QUATERNION_WARN_TOL {
                log::warn!(
                    "{}: frame {i} quaternion has norm {norm:.6}; normalizing",
                    path.display()
                );
            }
            let t = entry.translation.unwrap_or([0.0; 3]);
            Ok(RigidTransform::from_quaternion(
                q.map(|c| c / norm),
                Vector3::from(t),
            ))
        }
        (Some(_), Some(_)) => Err(FormatError::parse(path, &loc, "give either 'matrix' or 'quaternion', not both")),
        (None, None) => Err(FormatError::parse(path, &loc, "missing pose ('quaternion' + 'translation' or 'matrix')")),
    }
}

fn open_image(path: &Path) -> Result<DynamicImage, FormatError> {
    if !path.exists() {
        return Err(FormatError::MissingFile(path.to_path_buf()));
    }
    image::open(path).map_err(|e| FormatError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a 16-bit grayscale PNG; raw value / `scale` = meters, raw 0 = invalid.
pub(crate) fn read_depth_png(path: &Path, scale: f64) -> Result<(usize, usize, Vec<f64>), FormatError> {
    match open_image(path)? {
        DynamicImage::ImageLuma16(img) => Ok((
            img.width() as usize,
            img.height() as usize,
            img.pixels().map(|p| p.0[0] as f64 / scale).collect(),
        )),
        other => Err(FormatError::Image {
            path: path.to_path_buf(),
            message: format!("depth image must be 16-bit grayscale, found {:?}", other.color()),
        }),
    }
}

pub(crate) fn write_depth_png(
    path: &Path,
    width: usize,
    height: usize,
    depth: &[f64],
    scale: f64,
) -> Result<(), FormatError> {
    let raw: Vec<u16> = depth
        .iter()
        .map(|&d| {
            if d > 0.0 && d.is_finite() {
                (d * scale).round().clamp(0.0, u16::MAX as f64) as u16
            } else {
                0
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, raw)
            .ok_or_else(|| FormatError::Invalid("depth buffer size mismatch".into()))?;
    img.save(path).map_err(|e| FormatError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes frames as PNGs plus `manifest.toml` under `dir`; returns the
/// manifest path. Poses are stored as quaternion + translation.
pub fn write_frame_sequence(
    frames: &[DepthFrame],
    dir: &Path,
    depth_scale: f64,
) -> Result<PathBuf, FormatError> {
    for sub in ["depth", "rgb"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| FormatError::io(dir, e))?;
    }
    let mut entries = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let depth_rel = format!("depth/{i:06}.png");
        write_depth_png(&dir.join(&depth_rel), f.width, f.height, &f.depth, depth_scale)?;
        let color_rel = match &f.color {
            Some(c) => {
                let rel = format!("rgb/{i:06}.png");
                let img: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_raw(
                    f.width as u32,
                    f.height as u32,
                    c.iter().flat_map(|p| *p).collect(),
                )
                .ok_or_else(|| FormatError::Invalid("color buffer size mismatch".into()))?;
                let p = dir.join(&rel);
                img.save(&p).map_err(|e| FormatError::Image {
                    path: p.clone(),
                    message: e.to_string(),
                })?;
                Some(rel)
            }
            None => None,
        };
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&f.pose.rotation);
        entries.push(FrameEntry {
            depth: depth_rel,
            color: color_rel,
            intrinsics: Some(f.intrinsics),
            quaternion: Some([q.i, q.j, q.k, q.w]),
            translation: Some(f.pose.translation.into()),
            matrix: None,
        });
    }
    let manifest = ManifestFile {
        depth_scale: Some(depth_scale),
        intrinsics: None,
        frame: entries,
    };
    let text = toml::to_string_pretty(&manifest).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let path = dir.join("manifest.toml");
    write_bytes(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> Intrinsics {
        Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 2.0,
            cy: 1.0,
        }
    }

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("manifest.toml");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn divisor_invalid_pixels_and_principal_point() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("d")).unwrap();
        let mut depth = vec![0.0; 5 * 3];
        depth[5 + 2] = 1.0; // principal point
        depth[0] = 0.0;
        write_depth_png(&dir.path().join("d/0.png"), 5, 3, &depth, 5000.0).unwrap();
        let m = write_manifest(
            dir.path(),
            "[[frame]]\ndepth = \"d/0.png\"\nintrinsics = { fx = 100.0, fy = 100.0, cx = 2.0, cy = 1.0 }\nquaternion = [0.0, 0.0, 0.0, 1.0]\ntranslation = [0.0, 0.0, 0.0]\n",
        );
        let frames = read_frame_manifest(&m).unwrap();
        assert_eq!(frames.len(), 1);
        let f = &frames[0];
        assert_eq!(f.depth_at(2, 1), 1.0); // raw 5000 / 5000
        assert_eq!(f.depth_at(0, 0), 0.0);
        assert_eq!(f.back_project(0, 0), None);
        assert_eq!(f.back_project(2, 1), Some(Point3::new(0.0, 0.0, 1.0)));
    }

    #[test]
    fn back_projection_hand_computed() {
        let pose = RigidTransform::new(
            nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let mut depth = vec![0.0; 20];
        depth[2 * 5 + 4] = 2.0;
        let f = DepthFrame {
            width: 5,
            height: 4,
            depth,
            color: None,
            intrinsics: k(),
            pose,
        };
        // camera point ((4-2)*2/100, (2-1)*2/100, 2) = (0.04, 0.02, 2)
        // rotated 90° about z: (-0.02, 0.04, 2), then translated
        let p = f.back_project(4, 2).unwrap();
        assert!((p - Point3::new(0.98, 2.04, 5.0)).norm() < 1e-12);
    }

    #[test]
    fn quaternion_normalization_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("d")).unwrap();
        write_depth_png(&dir.path().join("d/0.png"), 2, 2, &[1.0; 4], 5000.0).unwrap();
        let m = write_manifest(
            dir.path(),
            "[intrinsics]\nfx = 1.0\nfy = 1.0\ncx = 0.0\ncy = 0.0\n[[frame]]\ndepth = \"d/0.png\"\nquaternion = [0.0, 0.0, 0.0, 2.0]\n",
        );
        let f = read_frame_manifest(&m).unwrap();
        assert!((f[0].pose.rotation.matrix() - nalgebra::Matrix3::identity()).amax() < 1e-12);

        let m = write_manifest(
            dir.path(),
            "[intrinsics]\nfx = 1.0\nfy = 1.0\ncx = 0.0\ncy = 0.0\n[[frame]]\ndepth = \"d/0.png\"\nquaternion = [0.0, 0.0, 0.0, 0.0]\n",
        );
        assert!(matches!(
            read_frame_manifest(&m),
            Err(FormatError::NonNormalizedQuaternion { frame: 0, .. })
        ));

        let m = write_manifest(
            dir.path(),
            "[intrinsics]\nfx = 1.0\nfy = 1.0\ncx = 0.0\ncy = 0.0\n[[frame]]\ndepth = \"d/missing.png\"\nquaternion = [0.0, 0.0, 0.0, 1.0]\n",
        );
        assert!(matches!(read_frame_manifest(&m), Err(FormatError::MissingFile(_))));

        let m = write_manifest(dir.path(), "[[frame]]\ndepth = 3\n");
        assert!(matches!(read_frame_manifest(&m), Err(FormatError::Parse { .. })));
    }

    #[test]
    fn sequence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pose = RigidTransform::new(
            nalgebra::Rotation3::from_euler_angles(0.2, -0.4, 1.0),
            Vector3::new(0.5, -0.25, 1.5),
        );
        let depth: Vec<f64> = (0..12).map(|i| if i == 3 { 0.0 } else { 1.0 + i as f64 * 0.1 }).collect();
        let frame = DepthFrame {
            width: 4,
            height: 3,
            depth,
            color: Some((0..12).map(|i| [i as u8, 2 * i as u8, 255]).collect()),
            intrinsics: k(),
            pose,
        };
        let m = write_frame_sequence(std::slice::from_ref(&frame), dir.path(), 5000.0).unwrap();
        let back = read_frame_manifest(&m).unwrap().remove(0);
        assert_eq!(back.color, frame.color);
        for (a, b) in back.depth.iter().zip(&frame.depth) {
            assert!((a - b).abs() <= 0.5 / 5000.0);
        }
        assert!((back.pose.to_matrix4() - pose.to_matrix4()).amax() < 1e-12);
    }
}
