//! Normal-derivative and depth reconstruction losses on image buffers.
//!
//! The normal loss compares first-order pixel derivatives of an estimated
//! normal map (from a monocular predictor) and a rendered normal map; the
//! depth loss is the mean absolute difference between rendered and captured
//! depth. [`combined_loss`] adds both, weighted, to an externally supplied
//! base loss.
//!
//! Every reduction runs over entries that are valid in *both* inputs.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("map must be at least 2×2, got {width}×{height}")]
    TooSmall { width: usize, height: usize },
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("no jointly valid pixels")]
    NoValidPixels,
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("pixel {index}: normal is not unit length (norm {norm})")]
    NotUnit { index: usize, norm: f64 },
    #[error("buffer holds {found} entries, expected {expected}")]
    BufferSize { expected: usize, found: usize },
}

/// Unit-norm tolerance for valid normals.
pub const UNIT_TOL: f64 = 1e-4;

/// Per-pixel unit normals; zero vectors are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    normals: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl NormalMap {
    /// Row-major normals. Zero (or non-finite) entries become invalid;
    /// everything else must be unit length within [`UNIT_TOL`].
    pub fn new(width: usize, height: usize, normals: Vec<Vector3<f64>>) -> Result<Self, LossError> {
        if normals.len() != width * height {
            return Err(LossError::BufferSize {
                expected: width * height,
                found: normals.len(),
            });
        }
        let mut valid = vec![false; normals.len()];
        let mut normals = normals;
        for (i, n) in normals.iter_mut().enumerate() {
            let norm = n.norm();
            if norm == 0.0 || !norm.is_finite() {
                *n = Vector3::zeros();
                continue;
            }
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(LossError::NotUnit { index: i, norm });
            }
            valid[i] = true;
        }
        Ok(Self {
            width,
            height,
            normals,
            valid,
        })
    }

    /// Like [`NormalMap::new`] but renormalizes instead of rejecting
    /// (for quantized sources such as 8-bit PNGs).
    pub fn normalized(width: usize, height: usize, normals: Vec<Vector3<f64>>) -> Result<Self, LossError> {
        let normals = normals
            .into_iter()
            .map(|n| {
                let norm = n.norm();
                if norm > 1e-9 && norm.is_finite() {
                    n / norm
                } else {
                    Vector3::zeros()
                }
            })
            .collect();
        Self::new(width, height, normals)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> Option<Vector3<f64>> {
        let i = v * self.width + u;
        self.valid[i].then(|| self.normals[i])
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[v * self.width + u]
    }
}

/// Per-pixel depths in meters; non-positive or non-finite entries are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, depth: Vec<f64>) -> Result<Self, LossError> {
        if depth.len() != width * height {
            return Err(LossError::BufferSize {
                expected: width * height,
                found: depth.len(),
            });
        }
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            width,
            height,
            depth,
            valid,
        })
    }

    /// Uses an explicit mask; masked-in depths must be finite and ≥ 0.
    pub fn with_mask(width: usize, height: usize, depth: Vec<f64>, valid: Vec<bool>) -> Result<Self, LossError> {
        if depth.len() != width * height || valid.len() != depth.len() {
            return Err(LossError::BufferSize {
                expected: width * height,
                found: depth.len().min(valid.len()),
            });
        }
        if depth
            .iter()
            .zip(&valid)
            .any(|(d, &ok)| ok && !(d.is_finite() && *d >= 0.0))
        {
            return Err(LossError::NonFinite("depth"));
        }
        Ok(Self {
            width,
            height,
            depth,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }
}

/// Weights of the two geometry terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_n: f64,
    pub lambda_d: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_n: 1.0,
            lambda_d: 1.5,
        }
    }
}

/// Pixel derivatives of a normal map along u (columns) and v (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalDerivative {
    pub width: usize,
    pub height: usize,
    pub du: Vec<Vector3<f64>>,
    pub dv: Vec<Vector3<f64>>,
    pub du_valid: Vec<bool>,
    pub dv_valid: Vec<bool>,
}

impl NormalDerivative {
    /// True when both the u and v derivative exist at pixel `i`.
    pub fn pixel_valid(&self, i: usize) -> bool {
        self.du_valid[i] && self.dv_valid[i]
    }
}

/// Forward differences; the last column and row fall back to backward
/// differences. A derivative touching an invalid pixel is invalid.
pub fn normal_derivative(map: &NormalMap) -> Result<NormalDerivative, LossError> {
    let (w, h) = (map.width, map.height);
    if w < 2 || h < 2 {
        return Err(LossError::TooSmall { width: w, height: h });
    }
    let n = w * h;
    let mut out = NormalDerivative {
        width: w,
        height: h,
        du: vec![Vector3::zeros(); n],
        dv: vec![Vector3::zeros(); n],
        du_valid: vec![false; n],
        dv_valid: vec![false; n],
    };
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let (a, b) = if u + 1 < w { (i, i + 1) } else { (i - 1, i) };
            if map.valid[a] && map.valid[b] {
                out.du[i] = map.normals[b] - map.normals[a];
                out.du_valid[i] = true;
            }
            let (a, b) = if v + 1 < h { (i, i + w) } else { (i - w, i) };
            if map.valid[a] && map.valid[b] {
                out.dv[i] = map.normals[b] - map.normals[a];
                out.dv_valid[i] = true;
            }
        }
    }
    Ok(out)
}

/// Mean over jointly valid pixels of the L1 norm of the six derivative
/// components' differences.
pub fn normal_loss_from_derivatives(
    estimated: &NormalDerivative,
    rendered: &NormalDerivative,
) -> Result<f64, LossError> {
    if (estimated.width, estimated.height) != (rendered.width, rendered.height) {
        return Err(LossError::DimensionMismatch {
            a: (estimated.width, estimated.height),
            b: (rendered.width, rendered.height),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..estimated.du.len() {
        if !(estimated.pixel_valid(i) && rendered.pixel_valid(i)) {
            continue;
        }
        sum += (estimated.du[i] - rendered.du[i]).abs().sum()
            + (estimated.dv[i] - rendered.dv[i]).abs().sum();
        count += 1;
    }
    if count == 0 {
        return Err(LossError::NoValidPixels);
    }
    Ok(sum / count as f64)
}

/// Normal-derivative loss.
///
/// The default is the minimization form, the mean L1 derivative difference.
/// With `as_written` it returns `1 − mean`, the form as originally printed,
/// which grows as the maps agree and so is only kept for reference.
pub fn normal_loss(estimated: &NormalMap, rendered: &NormalMap, as_written: bool) -> Result<f64, LossError> {
    if (estimated.width, estimated.height) != (rendered.width, rendered.height) {
        return Err(LossError::DimensionMismatch {
            a: (estimated.width, estimated.height),
            b: (rendered.width, rendered.height),
        });
    }
    let m = normal_loss_from_derivatives(&normal_derivative(estimated)?, &normal_derivative(rendered)?)?;
    Ok(if as_written { 1.0 - m } else { m })
}

fn joint_pixels<'a>(
    rendered: &'a DepthMap,
    captured: &'a DepthMap,
) -> Result<impl Iterator<Item = usize> + 'a, LossError> {
    if (rendered.width, rendered.height) != (captured.width, captured.height) {
        return Err(LossError::DimensionMismatch {
            a: (rendered.width, rendered.height),
            b: (captured.width, captured.height),
        });
    }
    Ok((0..rendered.depth.len()).filter(move |&i| rendered.valid[i] && captured.valid[i]))
}

/// Mean absolute depth difference over jointly valid pixels.
pub fn depth_loss(rendered: &DepthMap, captured: &DepthMap) -> Result<f64, LossError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in joint_pixels(rendered, captured)? {
        sum += (rendered.depth[i] - captured.depth[i]).abs();
        count += 1;
    }
    if count == 0 {
        return Err(LossError::NoValidPixels);
    }
    Ok(sum / count as f64)
}

/// Gradient of [`depth_loss`] with respect to each rendered depth:
/// `sign(r − c) / N` on jointly valid pixels, 0 elsewhere (and at zero
/// residual, where the loss has a kink).
pub fn depth_loss_gradient(rendered: &DepthMap, captured: &DepthMap) -> Result<Vec<f64>, LossError> {
    let joint: Vec<usize> = joint_pixels(rendered, captured)?.collect();
    if joint.is_empty() {
        return Err(LossError::NoValidPixels);
    }
    let n = joint.len() as f64;
    let mut grad = vec![0.0; rendered.depth.len()];
    for i in joint {
        let r = rendered.depth[i] - captured.depth[i];
        grad[i] = if r > 0.0 {
            1.0 / n
        } else if r < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok(grad)
}

/// `base + λ_N·normal + λ_D·depth`.
pub fn combined_loss(base: f64, normal: f64, depth: f64, weights: LossWeights) -> Result<f64, LossError> {
    for (v, what) in [
        (base, "base loss"),
        (normal, "normal loss"),
        (depth, "depth loss"),
        (weights.lambda_n, "lambda_n"),
        (weights.lambda_d, "lambda_d"),
    ] {
        if !v.is_finite() {
            return Err(LossError::NonFinite(what));
        }
    }
    Ok(base + weights.lambda_n * normal + weights.lambda_d * depth)
}
