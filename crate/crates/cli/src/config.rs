//! Configuration file, flag merging and validation.
//!
//! ```toml
//! out = "run1"
//! seed = 7
//!
//! [inputs]
//! frames = "scan/manifest.toml"
//! cloud = "scene.ply"
//! labels = "scene.labels"
//!
//! [tsdf]
//! voxel = 0.02
//!
//! [registration]
//! models = "models"
//! candidates = 5
//! angle_step = 20
//! scale_mode = "anisotropic"
//!
//! [layout]
//! mode = "hybrid"
//! keep = [10, 12]
//! ```
//!
//! `[losses]` and `[synth]` take the options of the subcommands of the same
//! name. Flags given on the command line win over the file.

use std::path::{Path, PathBuf};

use roomfit_core::io::OutputMode;
use roomfit_core::registration::{EvalOptions, FitOptions, ScaleMode};
use roomfit_core::tsdf::TsdfParams;
use serde::{Deserialize, Serialize};

use crate::args::{
    CommonArgs, LossesArgs, ModeArg, RegistrationArgs, ResolveArgs, ScaleModeArg, SceneInputArgs, SynthArgs,
    TsdfArgs,
};
use crate::error::CliError;

pub const DEFAULT_OUT: &str = "roomfit-out";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputsSection {
    frames: Option<PathBuf>,
    cloud: Option<PathBuf>,
    labels: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    out: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(default)]
    inputs: InputsSection,
    #[serde(default)]
    tsdf: TsdfArgs,
    #[serde(default)]
    registration: RegistrationArgs,
    #[serde(default)]
    layout: ResolveArgs,
    #[serde(default)]
    losses: LossesArgs,
    #[serde(default)]
    synth: SynthArgs,
}

impl FileConfig {
    /// Reads `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Input(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.out);
        fix(&mut cfg.inputs.frames);
        fix(&mut cfg.inputs.cloud);
        fix(&mut cfg.inputs.labels);
        fix(&mut cfg.registration.models);
        fix(&mut cfg.losses.estimated_normals);
        fix(&mut cfg.losses.rendered_normals);
        fix(&mut cfg.losses.rendered_depth);
        fix(&mut cfg.losses.captured_depth);
        fix(&mut cfg.synth.spec);
        fix(&mut cfg.synth.models);
        Ok(cfg)
    }

    /// Seed from the file, if it sets one.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn for_args(common: &CommonArgs) -> Result<Self, CliError> {
        match &common.config {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

fn require(value: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    value.ok_or_else(|| CliError::config(format!("no input given for --{flag} (flag or config file)")))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must be a positive number, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must be a non-negative number, got {v}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CommonSettings {
    pub out: PathBuf,
    pub seed: u64,
}

impl CommonSettings {
    pub fn resolve(args: &CommonArgs, file: &FileConfig) -> Self {
        Self {
            out: args.out.clone().or(file.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into()),
            seed: args.seed.or(file.seed).unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FuseSettings {
    pub frames: PathBuf,
    pub voxel: f64,
    pub truncation: f64,
    pub depth_scale: Option<f64>,
}

impl FuseSettings {
    pub fn resolve(frames: Option<PathBuf>, args: &TsdfArgs, file: &FileConfig) -> Result<Self, CliError> {
        let voxel = positive("voxel", args.voxel.or(file.tsdf.voxel).unwrap_or(TsdfParams::default().voxel_size))?;
        let truncation = positive(
            "truncation",
            args.truncation
                .or(file.tsdf.truncation)
                .unwrap_or(TsdfParams::with_voxel_size(voxel).truncation),
        )?;
        if truncation < voxel {
            return Err(CliError::config(format!("truncation {truncation} is smaller than the voxel size {voxel}")));
        }
        let depth_scale = args
            .depth_scale
            .or(file.tsdf.depth_scale)
            .map(|s| positive("depth scale", s))
            .transpose()?;
        Ok(Self {
            frames: require(frames.or(file.inputs.frames.clone()), "frames")?,
            voxel,
            truncation,
            depth_scale,
        })
    }

    pub fn params(&self) -> TsdfParams {
        TsdfParams {
            voxel_size: self.voxel,
            truncation: self.truncation,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SceneSettings {
    pub cloud: PathBuf,
    pub labels: PathBuf,
}

impl SceneSettings {
    pub fn resolve(args: &SceneInputArgs, file: &FileConfig) -> Result<Self, CliError> {
        Ok(Self {
            cloud: require(args.cloud.clone().or(file.inputs.cloud.clone()), "cloud")?,
            labels: require(args.labels.clone().or(file.inputs.labels.clone()), "labels")?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationSettings {
    pub models: PathBuf,
    pub candidates: usize,
    pub angle_step: u32,
    pub samples: usize,
    pub scale_mode: ScaleModeArg,
}

impl RegistrationSettings {
    pub fn resolve(args: &RegistrationArgs, file: &FileConfig) -> Result<Self, CliError> {
        let f = &file.registration;
        let defaults = EvalOptions::default();
        let candidates = args.candidates.or(f.candidates).unwrap_or(defaults.candidates);
        if candidates == 0 {
            return Err(CliError::config("candidates must be at least 1"));
        }
        let angle_step = args.angle_step.or(f.angle_step).unwrap_or(defaults.fit.angle_step_deg);
        if angle_step == 0 || 360 % angle_step != 0 {
            return Err(CliError::config(format!("angle step {angle_step} must divide 360")));
        }
        let samples = args.samples.or(f.samples).unwrap_or(defaults.samples);
        if samples < 16 {
            return Err(CliError::config(format!("samples must be at least 16, got {samples}")));
        }
        Ok(Self {
            models: require(args.models.clone().or(f.models.clone()), "models")?,
            candidates,
            angle_step,
            samples,
            scale_mode: args.scale_mode.or(f.scale_mode).unwrap_or(ScaleModeArg::Anisotropic),
        })
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions {
            candidates: self.candidates,
            samples: self.samples,
            fit: FitOptions {
                angle_step_deg: self.angle_step,
                scale_mode: match self.scale_mode {
                    ScaleModeArg::Anisotropic => ScaleMode::Anisotropic,
                    ScaleModeArg::Uniform => ScaleMode::Uniform,
                },
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolveSettings {
    pub mode: ModeArg,
    pub keep: Vec<u32>,
    pub max_rounds: usize,
    pub margin: f64,
}

impl ResolveSettings {
    pub fn resolve(args: &ResolveArgs, file: &FileConfig) -> Result<Self, CliError> {
        let f = &file.layout;
        let mode = args.mode.or(f.mode).unwrap_or(ModeArg::Virtual);
        let mut keep = args.keep.clone().or(f.keep.clone()).unwrap_or_default();
        keep.sort_unstable();
        keep.dedup();
        if mode == ModeArg::Virtual && !keep.is_empty() {
            return Err(CliError::config("--keep only applies to hybrid mode"));
        }
        let max_rounds = args.max_rounds.or(f.max_rounds).unwrap_or(100);
        if max_rounds == 0 {
            return Err(CliError::config("max rounds must be at least 1"));
        }
        Ok(Self {
            mode,
            keep,
            max_rounds,
            margin: non_negative("margin", args.margin.or(f.margin).unwrap_or(1e-3))?,
        })
    }

    pub fn output_mode(&self) -> OutputMode {
        match self.mode {
            ModeArg::Virtual => OutputMode::Virtual,
            ModeArg::Hybrid => OutputMode::Hybrid,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LossesSettings {
    pub normals: Option<(PathBuf, PathBuf)>,
    pub depth: Option<(PathBuf, PathBuf)>,
    pub depth_scale: f64,
    pub base: f64,
    pub lambda_n: f64,
    pub lambda_d: f64,
    pub as_written: bool,
}

fn pair(a: Option<PathBuf>, b: Option<PathBuf>, names: [&str; 2]) -> Result<Option<(PathBuf, PathBuf)>, CliError> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => Err(CliError::config(format!("--{} and --{} must be given together", names[0], names[1]))),
    }
}

impl LossesSettings {
    pub fn resolve(args: &LossesArgs, file: &FileConfig) -> Result<Self, CliError> {
        let f = &file.losses;
        let normals = pair(
            args.estimated_normals.clone().or(f.estimated_normals.clone()),
            args.rendered_normals.clone().or(f.rendered_normals.clone()),
            ["estimated-normals", "rendered-normals"],
        )?;
        let depth = pair(
            args.rendered_depth.clone().or(f.rendered_depth.clone()),
            args.captured_depth.clone().or(f.captured_depth.clone()),
            ["rendered-depth", "captured-depth"],
        )?;
        if normals.is_none() && depth.is_none() {
            return Err(CliError::config("no normal or depth maps given"));
        }
        let base = args.base.or(f.base).unwrap_or(0.0);
        if !base.is_finite() {
            return Err(CliError::config("base loss must be finite"));
        }
        Ok(Self {
            normals,
            depth,
            depth_scale: positive(
                "depth scale",
                args.depth_scale.or(f.depth_scale).unwrap_or(roomfit_core::io::DEFAULT_DEPTH_SCALE),
            )?,
            base,
            lambda_n: non_negative("lambda_n", args.lambda_n.or(f.lambda_n).unwrap_or(1.0))?,
            lambda_d: non_negative("lambda_d", args.lambda_d.or(f.lambda_d).unwrap_or(1.5))?,
            as_written: args.as_written.or(f.as_written).unwrap_or(false),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSettings {
    pub spec: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub catalog: Option<usize>,
    pub frames: Option<usize>,
}

impl SynthSettings {
    pub fn resolve(args: &SynthArgs, file: &FileConfig) -> Result<Self, CliError> {
        let f = &file.synth;
        let s = Self {
            spec: args.spec.clone().or(f.spec.clone()),
            models: args.models.clone().or(f.models.clone()),
            catalog: args.catalog.or(f.catalog),
            frames: args.frames.or(f.frames),
        };
        if s.models.is_some() && s.catalog.is_some() {
            return Err(CliError::config("--models and --catalog are mutually exclusive"));
        }
        if s.catalog == Some(0) || s.frames == Some(0) {
            return Err(CliError::config("--catalog and --frames must be at least 1"));
        }
        Ok(s)
    }
}
