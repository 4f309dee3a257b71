//! Normal and depth map files for the loss evaluators.
//!
//! Two encodings are accepted, detected by content:
//!
//! * PNG. Normal maps are 8-bit RGB(A) with `n = rgb / 127.5 − 1`,
//!   renormalized after decoding; alpha 0 or pure black marks an invalid
//!   pixel. Depth maps are 16-bit grayscale divided by a depth scale.
//! * Raw float maps: ASCII `RFM1`, then little-endian `u32` width, height and
//!   channel count (3 for normals, 1 for depth), then row-major `f32` values.
//!   Zero or non-finite normals and non-positive depths are invalid.

use std::path::Path;

use image::DynamicImage;
use nalgebra::Vector3;

use super::frames::read_depth_png;
use super::{read_bytes, write_bytes, FormatError};
use crate::losses::{DepthMap, NormalMap};

const RAW_MAGIC: &[u8; 4] = b"RFM1";
const PNG_MAGIC: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

struct RawMap {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f32>,
}

fn parse_raw(path: &Path, bytes: &[u8]) -> Result<RawMap, FormatError> {
    if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
        return Err(FormatError::parse(path, "byte 0", "not a raw float map (missing RFM1 magic)"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (width, height, channels) = (word(0), word(1), word(2));
    let expected = width * height * channels * 4;
    if bytes.len() - 16 != expected {
        return Err(FormatError::parse(
            path,
            "byte 16",
            format!("expected {expected} bytes of data for {width}×{height}×{channels}, found {}", bytes.len() - 16),
        ));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawMap {
        width,
        height,
        channels,
        values,
    })
}

pub fn write_raw_map(path: &Path, width: usize, height: usize, channels: usize, values: &[f32]) -> Result<(), FormatError> {
    if values.len() != width * height * channels {
        return Err(FormatError::Invalid("raw map size mismatch".into()));
    }
    let mut out = Vec::with_capacity(16 + 4 * values.len());
    out.extend_from_slice(RAW_MAGIC);
    for v in [width, height, channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &out)
}

fn map_err(path: &Path) -> impl Fn(crate::losses::LossError) -> FormatError + '_ {
    move |e| FormatError::parse(path, "data", e.to_string())
}

pub fn read_normal_map(path: &Path) -> Result<NormalMap, FormatError> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(PNG_MAGIC) {
        let img = image::load_from_memory(&bytes).map_err(|e| FormatError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let has_alpha = img.color().has_alpha();
        let rgba = match img {
            DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => img.into_rgba8(),
            other => {
                return Err(FormatError::Image {
                    path: path.to_path_buf(),
                    message: format!("normal map must be 8-bit RGB or RGBA, found {:?}", other.color()),
                })
            }
        };
        let (w, h) = (rgba.width() as usize, rgba.height() as usize);
        let normals = rgba
            .pixels()
            .map(|p| {
                let [r, g, b, a] = p.0;
                if (has_alpha && a == 0) || (r, g, b) == (0, 0, 0) {
                    Vector3::zeros()
                } else {
                    Vector3::new(r as f64, g as f64, b as f64) / 127.5 - Vector3::repeat(1.0)
                }
            })
            .collect();
        return NormalMap::normalized(w, h, normals).map_err(map_err(path));
    }
    let raw = parse_raw(path, &bytes)?;
    if raw.channels != 3 {
        return Err(FormatError::parse(path, "byte 12", "normal maps need 3 channels"));
    }
    let normals = raw
        .values
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .map(|n| if n.iter().all(|c| c.is_finite()) { n } else { Vector3::zeros() })
        .collect();
    NormalMap::normalized(raw.width, raw.height, normals).map_err(map_err(path))
}

pub fn read_depth_map(path: &Path, depth_scale: f64) -> Result<DepthMap, FormatError> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(PNG_MAGIC) {
        let (w, h, depth) = read_depth_png(path, depth_scale)?;
        return DepthMap::new(w, h, depth).map_err(map_err(path));
    }
    let raw = parse_raw(path, &bytes)?;
    if raw.channels != 1 {
        return Err(FormatError::parse(path, "byte 12", "depth maps need 1 channel"));
    }
    DepthMap::new(raw.width, raw.height, raw.values.iter().map(|&v| v as f64).collect())
        .map_err(map_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_normals_decode_and_mask() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.png");
        let img = image::RgbaImage::from_raw(
            2,
            1,
            vec![128, 128, 255, 255, 10, 20, 30, 0],
        )
        .unwrap();
        img.save(&p).unwrap();
        let m = read_normal_map(&p).unwrap();
        let n = m.get(0, 0).unwrap();
        assert!((n - Vector3::z()).norm() < 0.01);
        assert!(m.get(1, 0).is_none());
    }

    #[test]
    fn raw_depth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        write_raw_map(&p, 3, 2, 1, &[1.0, 2.0, 0.0, 4.0, 5.5, f32::NAN]).unwrap();
        let m = read_depth_map(&p, 5000.0).unwrap();
        assert_eq!(m.mask(), &[true, true, false, true, true, false]);
        assert_eq!(m.depths()[4], 5.5);
    }

    #[test]
    fn raw_size_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        let mut bytes = RAW_MAGIC.to_vec();
        for v in [2u32, 2, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0; 8]);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_depth_map(&p, 1.0), Err(FormatError::Parse { .. })));
    }
}
