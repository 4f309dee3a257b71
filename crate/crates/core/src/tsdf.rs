//! Truncated signed distance fusion of posed depth frames.
//!
//! Each voxel stores a clamped, truncation-normalized signed distance
//! averaged over every frame that observed it (projective distance along the
//! camera's optical axis), an integration weight and a running color mean.
//! Voxels further than one truncation band behind the observed surface are
//! left untouched so occluded views do not erode walls. Surface points are
//! read back by linear interpolation along voxel edges whose endpoints
//! change sign.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::PointCloud;
use crate::io::{DepthFrame, FormatError};

#[derive(Debug, Error)]
pub enum TsdfError {
    #[error("invalid volume parameters: {0}")]
    InvalidParams(String),
    #[error("volume has no surface crossings")]
    EmptyVolume,
    #[error("no valid depth in any frame")]
    NoDepth,
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Fusion parameters. Truncation is in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsdfParams {
    pub voxel_size: f64,
    pub truncation: f64,
}

impl Default for TsdfParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.02,
            truncation: 0.1,
        }
    }
}

impl TsdfParams {
    pub fn with_voxel_size(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            truncation: 5.0 * voxel_size,
        }
    }

    pub fn validate(&self) -> Result<(), TsdfError> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(TsdfError::InvalidParams(format!(
                "voxel size must be positive, got {}",
                self.voxel_size
            )));
        }
        if !(self.truncation >= self.voxel_size && self.truncation.is_finite()) {
            return Err(TsdfError::InvalidParams(format!(
                "truncation {} must be at least the voxel size {}",
                self.truncation, self.voxel_size
            )));
        }
        Ok(())
    }
}

/// Dense voxel grid. Voxel `(i, j, k)` is centered at
/// `origin + voxel_size·(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    origin: Point3<f64>,
    voxel_size: f64,
    dims: [usize; 3],
    truncation: f64,
    tsdf: Vec<f64>,
    weight: Vec<f32>,
    color: Vec<[f32; 3]>,
    color_weight: Vec<f32>,
    has_color: bool,
}

const MAX_VOXELS: usize = 1 << 30;

impl TsdfVolume {
    pub fn new(origin: Point3<f64>, dims: [usize; 3], params: TsdfParams) -> Result<Self, TsdfError> {
        params.validate()?;
        if dims.iter().any(|&d| d == 0) {
            return Err(TsdfError::InvalidParams(format!("dims must be positive, got {dims:?}")));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= MAX_VOXELS)
            .ok_or_else(|| TsdfError::InvalidParams(format!("volume {dims:?} is too large")))?;
        if !origin.coords.iter().all(|c| c.is_finite()) {
            return Err(TsdfError::InvalidParams("origin must be finite".into()));
        }
        Ok(Self {
            origin,
            voxel_size: params.voxel_size,
            dims,
            truncation: params.truncation,
            tsdf: vec![1.0; n],
            weight: vec![0.0; n],
            color: vec![[0.0; 3]; n],
            color_weight: vec![0.0; n],
            has_color: false,
        })
    }

    /// Covers the axis-aligned box `[min, max]`.
    pub fn from_bounds(min: Point3<f64>, max: Point3<f64>, params: TsdfParams) -> Result<Self, TsdfError> {
        params.validate()?;
        let extent = max - min;
        if extent.iter().any(|e| !(*e >= 0.0)) {
            return Err(TsdfError::InvalidParams("bounds are inverted".into()));
        }
        let dims = [0, 1, 2].map(|k| (extent[k] / params.voxel_size).ceil() as usize + 1);
        Self::new(min, dims, params)
    }

    /// Bounds of every valid back-projected pixel and camera center, padded by
    /// one truncation band plus a voxel.
    pub fn bounds_for_frames(frames: &[DepthFrame], params: TsdfParams) -> Result<(Point3<f64>, Point3<f64>), TsdfError> {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        let mut any = false;
        for f in frames {
            let c = f.pose.translation;
            lo = lo.inf(&c);
            hi = hi.sup(&c);
            for v in 0..f.height {
                for u in 0..f.width {
                    if let Some(p) = f.back_project(u, v) {
                        lo = lo.inf(&p.coords);
                        hi = hi.sup(&p.coords);
                        any = true;
                    }
                }
            }
        }
        if !any {
            return Err(TsdfError::NoDepth);
        }
        let pad = Vector3::repeat(params.truncation + params.voxel_size);
        Ok((Point3::from(lo - pad), Point3::from(hi + pad)))
    }

    /// Volume sized to the frames (see [`TsdfVolume::bounds_for_frames`]).
    pub fn for_frames(frames: &[DepthFrame], params: TsdfParams) -> Result<Self, TsdfError> {
        let (lo, hi) = Self::bounds_for_frames(frames, params)?;
        Self::from_bounds(lo, hi, params)
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn voxel_center(&self, [i, j, k]: [usize; 3]) -> Point3<f64> {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }

    pub fn tsdf_at(&self, idx: [usize; 3]) -> f64 {
        self.tsdf[self.index(idx)]
    }

    pub fn weight_at(&self, idx: [usize; 3]) -> f64 {
        self.weight[self.index(idx)] as f64
    }

    /// Overwrites one voxel's distance and weight.
    pub fn set_voxel(&mut self, idx: [usize; 3], tsdf: f64, weight: f64) {
        let i = self.index(idx);
        self.tsdf[i] = tsdf.clamp(-1.0, 1.0);
        self.weight[i] = weight.max(0.0) as f32;
    }

    pub fn weights(&self) -> &[f32] {
        &self.weight
    }

    pub fn tsdf_values(&self) -> &[f64] {
        &self.tsdf
    }

    /// Fuses one frame with weight 1. Voxels outside the frustum, behind the
    /// camera, over invalid depth or more than one truncation band behind
    /// the surface are skipped.
    pub fn integrate(&mut self, frame: &DepthFrame) {
        let world_to_cam = frame.pose.inverse();
        let k = frame.intrinsics;
        let (w, h) = (frame.width as f64, frame.height as f64);
        let [nx, ny, _] = self.dims;
        let slice = nx * ny;
        let step_x = world_to_cam.rotation * Vector3::x() * self.voxel_size;
        let trunc = self.truncation;
        let colors = frame.color.as_deref();
        if colors.is_some() {
            self.has_color = true;
        }
        let origin = self.origin;
        let voxel = self.voxel_size;

        self.tsdf
            .par_chunks_mut(slice)
            .zip(self.weight.par_chunks_mut(slice))
            .zip(self.color.par_chunks_mut(slice))
            .zip(self.color_weight.par_chunks_mut(slice))
            .enumerate()
            .for_each(|(kz, (((tsdf, weight), color), color_weight))| {
                for jy in 0..ny {
                    let row_start = origin + Vector3::new(0.0, jy as f64, kz as f64) * voxel;
                    let mut pc = world_to_cam.apply_point(&row_start);
                    for ix in 0..nx {
                        if ix > 0 {
                            pc += step_x;
                        }
                        if pc.z <= 0.0 {
                            continue;
                        }
                        let u = (k.fx * pc.x / pc.z + k.cx).round();
                        let v = (k.fy * pc.y / pc.z + k.cy).round();
                        if !(u >= 0.0 && v >= 0.0 && u < w && v < h) {
                            continue;
                        }
                        let pix = v as usize * frame.width + u as usize;
                        let d = frame.depth[pix];
                        if !(d > 0.0) {
                            continue;
                        }
                        let s = d - pc.z;
                        if s < -trunc {
                            continue;
                        }
                        let sdf = (s / trunc).clamp(-1.0, 1.0);
                        let i = jy * nx + ix;
                        let w_old = weight[i] as f64;
                        tsdf[i] = (tsdf[i] * w_old + sdf) / (w_old + 1.0);
                        weight[i] += 1.0;
                        if let Some(c) = colors {
                            let cw = color_weight[i];
                            let rgb = c[pix];
                            for ch in 0..3 {
                                let x = rgb[ch] as f32 / 255.0;
                                color[i][ch] = (color[i][ch] * cw + x) / (cw + 1.0);
                            }
                            color_weight[i] = cw + 1.0;
                        }
                    }
                }
            });
    }

    /// One point per voxel edge whose endpoints are both observed and change
    /// sign, placed at the linearly interpolated zero crossing.
    pub fn extract_points(&self) -> Result<PointCloud, TsdfError> {
        let [nx, ny, nz] = self.dims;
        let slices: Vec<(Vec<Point3<f64>>, Vec<[f64; 3]>)> = (0..nz)
            .into_par_iter()
            .map(|kz| {
                let mut pts = Vec::new();
                let mut cols = Vec::new();
                for jy in 0..ny {
                    for ix in 0..nx {
                        let a = [ix, jy, kz];
                        let ia = self.index(a);
                        if self.weight[ia] <= 0.0 {
                            continue;
                        }
                        for axis in 0..3 {
                            let mut b = a;
                            b[axis] += 1;
                            if b[axis] >= self.dims[axis] {
                                continue;
                            }
                            let ib = self.index(b);
                            if self.weight[ib] <= 0.0 {
                                continue;
                            }
                            let (da, db) = (self.tsdf[ia], self.tsdf[ib]);
                            if (da < 0.0) == (db < 0.0) {
                                continue;
                            }
                            let t = da / (da - db);
                            let pa = self.voxel_center(a);
                            let pb = self.voxel_center(b);
                            pts.push(pa + (pb - pa) * t);
                            if self.has_color {
                                cols.push(self.edge_color(ia, ib, t));
                            }
                        }
                    }
                }
                (pts, cols)
            })
            .collect();
        let mut points = Vec::new();
        let mut colors = Vec::new();
        for (p, c) in slices {
            points.extend(p);
            colors.extend(c);
        }
        if points.is_empty() {
            return Err(TsdfError::EmptyVolume);
        }
        Ok(PointCloud {
            points,
            colors: self.has_color.then_some(colors),
        })
    }

    fn edge_color(&self, ia: usize, ib: usize, t: f64) -> [f64; 3] {
        let ca = (self.color_weight[ia] > 0.0).then(|| self.color[ia].map(|c| c as f64));
        let cb = (self.color_weight[ib] > 0.0).then(|| self.color[ib].map(|c| c as f64));
        match (ca, cb) {
            (Some(a), Some(b)) => [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * t),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => [0.5; 3],
        }
    }

    const MAGIC: &'static [u8; 8] = b"RFTSDF01";

    /// Binary checkpoint: magic `RFTSDF01`, `u32` dims ×3, `f64` origin ×3,
    /// voxel size, truncation, `u8` color flag, then per voxel (x fastest)
    /// `f64` tsdf, `f32` weight, `f32` color weight, `f32` RGB ×3, all
    /// little-endian.
    pub fn save(&self, path: &Path) -> Result<(), TsdfError> {
        let n = self.tsdf.len();
        let mut out = Vec::with_capacity(8 + 12 + 40 + 1 + n * 28);
        out.extend_from_slice(Self::MAGIC);
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in [self.origin.x, self.origin.y, self.origin.z, self.voxel_size, self.truncation] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.has_color as u8);
        for i in 0..n {
            out.extend_from_slice(&self.tsdf[i].to_le_bytes());
            out.extend_from_slice(&self.weight[i].to_le_bytes());
            out.extend_from_slice(&self.color_weight[i].to_le_bytes());
            for c in self.color[i] {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        std::fs::write(path, out).map_err(|e| TsdfError::Format(FormatError::Io {
            path: path.to_path_buf(),
            source: e,
        }))
    }

    pub fn load(path: &Path) -> Result<Self, TsdfError> {
        let bytes = std::fs::read(path).map_err(|e| TsdfError::Format(FormatError::Io {
            path: path.to_path_buf(),
            source: e,
        }))?;
        let bad = |at: usize, msg: &str| {
            TsdfError::Format(FormatError::Parse {
                path: path.to_path_buf(),
                location: format!("byte {at}"),
                message: msg.to_string(),
            })
        };
        const HEADER: usize = 8 + 12 + 40 + 1;
        if bytes.len() < HEADER || &bytes[..8] != Self::MAGIC {
            return Err(bad(0, "not a TSDF volume file"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let dims = [u32_at(8), u32_at(12), u32_at(16)];
        let origin = Point3::new(f64_at(20), f64_at(28), f64_at(36));
        let params = TsdfParams {
            voxel_size: f64_at(44),
            truncation: f64_at(52),
        };
        let mut vol = Self::new(origin, dims, params)?;
        vol.has_color = bytes[60] != 0;
        let n = vol.tsdf.len();
        if bytes.len() != HEADER + n * 28 {
            return Err(bad(HEADER, "voxel data length does not match header dims"));
        }
        for i in 0..n {
            let o = HEADER + i * 28;
            vol.tsdf[i] = f64_at(o);
            vol.weight[i] = f32_at(o + 8);
            vol.color_weight[i] = f32_at(o + 12);
            vol.color[i] = [f32_at(o + 16), f32_at(o + 20), f32_at(o + 24)];
        }
        Ok(vol)
    }
}
