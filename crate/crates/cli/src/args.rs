//! Command-line definitions. Every option can also come from the TOML file
//! given with `--config`; a flag on the command line wins over the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "roomfit",
    version,
    about = "Room layouts from RGB-D scans: depth fusion, room envelope, furniture registration and placement constraints",
    after_help = "Exit codes: 0 success, 1 other failure, 2 missing or unreadable input, \
3 fusion extracted no surface, 4 layout has residual constraint violations, \
5 invalid configuration or command line."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse a posed depth sequence into a colored point cloud (PLY).
    Fuse(FuseArgs),
    /// Fit the floor plane, floor contour and room height of a labeled scan.
    Envelope(EnvelopeArgs),
    /// Fit catalog models to the furniture instances of a labeled scan.
    Register(RegisterArgs),
    /// Envelope, registration and constraint resolution; writes a layout.
    Layout(LayoutArgs),
    /// Evaluate the normal-derivative and depth losses on map files.
    Losses(LossesArgs),
    /// Generate a synthetic labeled room, optionally with a model catalog
    /// and a rendered depth sequence.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML configuration file; relative paths in it resolve against its directory.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Output directory [default: roomfit-out].
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(long, short = 'v')]
    pub verbose: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SceneInputArgs {
    /// Scanned point cloud (PLY).
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Instance label file for the cloud.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TsdfArgs {
    /// Voxel edge length in meters [default: 0.02].
    #[arg(long)]
    pub voxel: Option<f64>,
    /// Truncation distance in meters [default: 5 × voxel].
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Raw depth units per meter; overrides the manifest.
    #[arg(long)]
    pub depth_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleModeArg {
    Anisotropic,
    Uniform,
}

#[derive(Debug, Args, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationArgs {
    /// Model database root (directory holding index.toml).
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Candidate models drawn per instance [default: 5].
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Rotation sweep step in degrees; must divide 360 [default: 20].
    #[arg(long)]
    pub angle_step: Option<u32>,
    /// Surface samples per candidate model [default: 4096].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Per-axis or single scale factor [default: anisotropic].
    #[arg(long, value_enum)]
    pub scale_mode: Option<ScaleModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Virtual,
    Hybrid,
}

#[derive(Debug, Args, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveArgs {
    /// Output mode [default: virtual].
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Instance ids replaced by models in hybrid mode (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub keep: Option<Vec<u32>>,
    /// Constraint resolution rounds [default: 100].
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Gap left between separated objects in meters [default: 0.001].
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct FuseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Frame manifest (TOML).
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[command(flatten)]
    pub tsdf: TsdfArgs,
}

#[derive(Debug, Args, Clone)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scene: SceneInputArgs,
}

#[derive(Debug, Args, Clone)]
pub struct RegisterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scene: SceneInputArgs,
    #[command(flatten)]
    pub registration: RegistrationArgs,
}

#[derive(Debug, Args, Clone)]
pub struct LayoutArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scene: SceneInputArgs,
    #[command(flatten)]
    pub registration: RegistrationArgs,
    #[command(flatten)]
    pub resolve: ResolveArgs,
}

#[derive(Debug, Args, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LossesArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Estimated (reference) normal map, PNG or raw float map.
    #[arg(long)]
    pub estimated_normals: Option<PathBuf>,
    /// Rendered normal map.
    #[arg(long)]
    pub rendered_normals: Option<PathBuf>,
    /// Rendered depth map, PNG or raw float map.
    #[arg(long)]
    pub rendered_depth: Option<PathBuf>,
    /// Captured depth map.
    #[arg(long)]
    pub captured_depth: Option<PathBuf>,
    /// Raw units per meter of 16-bit PNG depth maps [default: 5000].
    #[arg(long)]
    pub depth_scale: Option<f64>,
    /// Base photometric loss added to the weighted terms [default: 0].
    #[arg(long)]
    pub base: Option<f64>,
    /// Weight of the normal term [default: 1].
    #[arg(long)]
    pub lambda_n: Option<f64>,
    /// Weight of the depth term [default: 1.5].
    #[arg(long)]
    pub lambda_d: Option<f64>,
    /// Use the `1 − mean` form of the normal loss.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub as_written: Option<bool>,
}

#[derive(Debug, Args, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Scene spec (TOML) [default: empty 4 × 3 × 2.5 m box room].
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Existing model database for `model` furniture.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Generate a procedural catalog with this many models per category
    /// under <out>/models and use it.
    #[arg(long)]
    pub catalog: Option<usize>,
    /// Render this many depth frames along an orbit under <out>/frames.
    #[arg(long)]
    pub frames: Option<usize>,
}
