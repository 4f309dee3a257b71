//! Subcommand drivers. Each resolves and validates its settings before
//! touching any input, then writes its outputs and `run.json`.

use std::path::Path;

use log::{info, warn};
use roomfit_core::envelope::{build_envelope, write_contour};
use roomfit_core::io::{
    read_frame_manifest_with, read_labels, read_point_cloud, write_frame_sequence,
    write_labels, write_point_cloud, EnvelopeSummary, ModelDatabase, PlacementRecord, Provenance, SegmentedScene,
    DEFAULT_DEPTH_SCALE,
};
use roomfit_core::io::maps::{read_depth_map, read_normal_map};
use roomfit_core::losses::{combined_loss, depth_loss, normal_loss, LossWeights};
use roomfit_core::pipeline::{run_layout, LayoutConfig};
use roomfit_core::registration::{evaluate_scene, Method, SceneReport};
use roomfit_core::synth::{generate_model_database, generate_scene, orbit_path, render_depth_sequence, Camera, SceneSpec};
use roomfit_core::tsdf::TsdfVolume;
use serde::Serialize;

use crate::args::{EnvelopeArgs, FuseArgs, LayoutArgs, LossesArgs, RegisterArgs, SynthArgs};
use crate::config::{
    CommonSettings, FileConfig, FuseSettings, LossesSettings, RegistrationSettings, ResolveSettings, SceneSettings,
    SynthSettings,
};
use crate::error::CliError;
use crate::manifest::{sha256_database, sha256_frames, Recorder};

const FUSED: &str = "fused.ply";
const ENVELOPE: &str = "envelope.json";
const CONTOUR: &str = "contour.txt";
const FITTED: &str = "fitted.txt";
const BASELINE: &str = "baseline.txt";
const PLACEMENTS: &str = "placements.json";
const LAYOUT: &str = "layout.json";
const LOSSES: &str = "losses.toml";

fn write_text(rec: &mut Recorder, name: &str, text: &str) -> Result<(), CliError> {
    let path = rec.path(name);
    std::fs::write(&path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    rec.output(name)
}

fn write_json(rec: &mut Recorder, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_text(rec, name, &text)
}

fn load_scene(settings: &SceneSettings, rec: &mut Recorder) -> Result<SegmentedScene, CliError> {
    let cloud = read_point_cloud(&settings.cloud)?;
    let scene = read_labels(&settings.labels, cloud)?;
    rec.input_file("cloud", &settings.cloud)?;
    rec.input_file("labels", &settings.labels)?;
    for w in &scene.warnings {
        warn!("{w}");
    }
    Ok(scene)
}

fn open_database(path: &Path, rec: &mut Recorder) -> Result<ModelDatabase, CliError> {
    let db = ModelDatabase::open(path)?;
    rec.input("models", path, sha256_database(&db)?);
    Ok(db)
}

fn scene_name(settings: &SceneSettings) -> String {
    settings
        .cloud
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into())
}

fn write_reports(
    rec: &mut Recorder,
    name: &str,
    fitted: &SceneReport,
    baseline: &SceneReport,
) -> Result<(), CliError> {
    write_text(rec, FITTED, &fitted.to_text(name))?;
    write_text(rec, BASELINE, &baseline.to_text(name))?;
    for r in [fitted, baseline] {
        println!(
            "{:<8} Dist {:.4} (±{:.4}) over {} instances, {} skipped",
            r.method.name(),
            r.mean,
            r.std,
            r.results.len(),
            r.skipped.len()
        );
    }
    Ok(())
}

pub fn fuse(args: FuseArgs) -> Result<(), CliError> {
    let file = FileConfig::for_args(&args.common)?;
    let common = CommonSettings::resolve(&args.common, &file);
    let settings = FuseSettings::resolve(args.frames, &args.tsdf, &file)?;
    let params = settings.params();
    params.validate()?;

    let frames = read_frame_manifest_with(&settings.frames, settings.depth_scale)?;
    let mut rec = Recorder::new("fuse", &common.out, None, &settings)?;
    rec.input_file("frames", &settings.frames)?;
    rec.input("frames_decoded", &settings.frames, sha256_frames(&frames));

    let mut volume = TsdfVolume::for_frames(&frames, params)?;
    info!("volume {:?} voxels at {} m", volume.dims(), volume.voxel_size());
    for (i, f) in frames.iter().enumerate() {
        volume.integrate(f);
        info!("integrated frame {}/{}", i + 1, frames.len());
    }
    let cloud = volume.extract_points()?;
    write_point_cloud(&cloud, &rec.path(FUSED))?;
    rec.output(FUSED)?;
    println!("fused {} frames into {} points: {}", frames.len(), cloud.len(), rec.path(FUSED).display());
    rec.write(0)
}

#[derive(Serialize)]
struct EnvelopeOutput {
    #[serde(flatten)]
    summary: EnvelopeSummary,
    /// Wall points below the floor whose height was clamped to zero.
    clamped_heights: usize,
}

pub fn envelope(args: EnvelopeArgs) -> Result<(), CliError> {
    let file = FileConfig::for_args(&args.common)?;
    let common = CommonSettings::resolve(&args.common, &file);
    let settings = SceneSettings::resolve(&args.scene, &file)?;

    let mut rec = Recorder::new("envelope", &common.out, None, &settings)?;
    let scene = load_scene(&settings, &mut rec)?;
    let env = build_envelope(&scene)?;
    write_json(
        &mut rec,
        ENVELOPE,
        &EnvelopeOutput {
            summary: env.summary(),
            clamped_heights: env.clamped_heights,
        },
    )?;
    write_contour(&env.floor.contour, &rec.path(CONTOUR))?;
    rec.output(CONTOUR)?;
    println!(
        "area {:.4} m², height {:.4} m, volume {:.4} m³, {} contour vertices",
        env.floor.area,
        env.height,
        env.volume,
        env.floor.contour.len()
    );
    rec.write(0)
}

#[derive(Serialize)]
struct RegisterParams<'a> {
    scene: &'a SceneSettings,
    registration: &'a RegistrationSettings,
}

pub fn register(args: RegisterArgs) -> Result<(), CliError> {
    let file = FileConfig::for_args(&args.common)?;
    let common = CommonSettings::resolve(&args.common, &file);
    let scene_settings = SceneSettings::resolve(&args.scene, &file)?;
    let reg = RegistrationSettings::resolve(&args.registration, &file)?;

    let params = RegisterParams {
        scene: &scene_settings,
        registration: &reg,
    };
    let mut rec = Recorder::new("register", &common.out, Some(common.seed), &params)?;
    let scene = load_scene(&scene_settings, &mut rec)?;
    let db = open_database(&reg.models, &mut rec)?;
    let env = build_envelope(&scene)?;
    let options = reg.eval_options(common.seed);
    let frame = env.floor.frame;
    let fitted = evaluate_scene(&scene, &db, &frame, Method::Fitted, options)?;
    let baseline = evaluate_scene(&scene, &db, &frame, Method::Baseline, options)?;
    for k in &fitted.skipped {
        warn!("instance {} ({}) skipped: {}", k.instance_id, k.category, k.reason);
    }
    write_reports(&mut rec, &scene_name(&scene_settings), &fitted, &baseline)?;
    let records: Vec<PlacementRecord> = fitted
        .results
        .iter()
        .map(|r| r.placement.to_record(r.instance_id))
        .collect();
    write_json(&mut rec, PLACEMENTS, &records)?;
    rec.write(0)
}

#[derive(Serialize)]
struct LayoutParams<'a> {
    scene: &'a SceneSettings,
    registration: &'a RegistrationSettings,
    layout: &'a ResolveSettings,
}

pub fn layout(args: LayoutArgs) -> Result<(), CliError> {
    let file = FileConfig::for_args(&args.common)?;
    let common = CommonSettings::resolve(&args.common, &file);
    let scene_settings = SceneSettings::resolve(&args.scene, &file)?;
    let reg = RegistrationSettings::resolve(&args.registration, &file)?;
    let resolve = ResolveSettings::resolve(&args.resolve, &file)?;

    let params = LayoutParams {
        scene: &scene_settings,
        registration: &reg,
        layout: &resolve,
    };
    let mut rec = Recorder::new("layout", &common.out, Some(common.seed), &params)?;
    let scene = load_scene(&scene_settings, &mut rec)?;
    let db = open_database(&reg.models, &mut rec)?;
    let config = LayoutConfig {
        mode: resolve.output_mode(),
        keep: resolve.keep.clone(),
        eval: reg.eval_options(common.seed),
        resolve: roomfit_core::constraints::ResolveOptions {
            max_rounds: resolve.max_rounds,
            margin: resolve.margin,
        },
        ..Default::default()
    };
    let provenance = Provenance {
        tool_version: roomfit_core::VERSION.into(),
        seed: common.seed,
        inputs: rec.input_digests(),
    };
    let run = run_layout(&scene, &db, &config, provenance)?;
    write_reports(&mut rec, &scene_name(&scene_settings), &run.fitted, &run.baseline)?;

    let layout_path = rec.path(LAYOUT);
    run.output.write(&layout_path)?;
    rec.output(LAYOUT)?;
    rec.output(&Path::new(LAYOUT).with_extension("obj").to_string_lossy())?;
    if let Some(pt) = &run.output.document.pass_through {
        rec.output(&pt.cloud)?;
    }
    println!(
        "{} placements, {} resolution rounds: {}",
        run.output.document.placements.len(),
        run.resolve_report.rounds(),
        layout_path.display()
    );
    let residuals = &run.output.document.residual_violations;
    for v in residuals {
        eprintln!("residual violation: {v}");
    }
    if residuals.is_empty() {
        rec.write(0)
    } else {
        let err = CliError::Residual(residuals.len());
        rec.write(err.exit_code())?;
        Err(err)
    }
}

#[derive(Serialize)]
struct LossesOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    normal_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth_loss: Option<f64>,
    /// `base + lambda_n·normal + lambda_d·depth`, when both terms are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    combined: Option<f64>,
}

pub fn losses(args: LossesArgs) -> Result<(), CliError> {
    let file = FileConfig::for_args(&args.common)?;
    let common = CommonSettings::resolve(&args.common, &file);
    let settings = LossesSettings::resolve(&args, &file)?;

    let mut rec = Recorder::new("losses", &common.out, None, &settings)?;
    let normal = match &settings.normals {
        Some((est, ren)) => {
            let a = read_normal_map(est)?;
            let b = read_normal_map(ren)?;
            rec.input_file("estimated_normals", est)?;
            rec.input_file("rendered_normals", ren)?;
            Some(normal_loss(&a, &b, settings.as_written)?)
        }
        None => None,
    };
    let depth = match &settings.depth {
        Some((ren, cap)) => {
            let a = read_depth_map(ren, settings.depth_scale)?;
            let b = read_depth_map(cap, settings.depth_scale)?;
            rec.input_file("rendered_depth", ren)?;
            rec.input_file("captured_depth", cap)?;
            Some(depth_loss(&a, &b)?)
        }
        None => None,
    };
    let combined = match (normal, depth) {
        (Some(n), Some(d)) => Some(combined_loss(
            settings.base,
            n,
            d,
            LossWeights {
                lambda_n: settings.lambda_n,
                lambda_d: settings.lambda_d,
            },
        )?),
        _ => None,
    };
    let text = toml::to_string(&LossesOutput {
        normal_loss: normal,
        depth_loss: depth,
        combined,
    })
    .map_err(|e| CliError::Other(e.to_string()))?;
    print!("{text}");
    write_text(&mut rec, LOSSES, &text)?;
    rec.write(0)
}

#[derive(Serialize)]
struct SynthParams<'a> {
    #[serde(flatten)]
    settings: &'a SynthSettings,
    seed: u64,
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let file = FileConfig::for_args(&args.common)?;
    let common = CommonSettings::resolve(&args.common, &file);
    let settings = SynthSettings::resolve(&args, &file)?;

    let mut spec = match &settings.spec {
        Some(p) => SceneSpec::read(p)?,
        None => SceneSpec::box_room([4.0, 3.0, 2.5]),
    };
    if let Some(seed) = args.common.seed.or(file.seed()) {
        spec.seed = seed;
    }
    let mut rec = Recorder::new(
        "synth",
        &common.out,
        Some(spec.seed),
        &SynthParams {
            settings: &settings,
            seed: spec.seed,
        },
    )?;
    if let Some(p) = &settings.spec {
        rec.input_file("spec", p)?;
    }
    let db = match (&settings.models, settings.catalog) {
        (Some(p), _) => Some(open_database(p, &mut rec)?),
        (None, Some(n)) => {
            let db = generate_model_database(&rec.path("models"), n, spec.seed)?;
            rec.output_dir("models")?;
            Some(db)
        }
        (None, None) => None,
    };
    let (scene, truth) = generate_scene(&spec, db.as_ref())?;
    write_point_cloud(&scene.cloud, &rec.path("scene.ply"))?;
    rec.output("scene.ply")?;
    write_labels(&scene, &rec.path("scene.labels"))?;
    rec.output("scene.labels")?;
    write_json(&mut rec, "truth.json", &truth.summary())?;
    write_text(&mut rec, "spec.toml", &spec.to_toml())?;
    if let Some(n) = settings.frames {
        let poses = orbit_path(&spec, n);
        let frames = render_depth_sequence(&spec, db.as_ref(), Camera::default(), &poses)?;
        write_frame_sequence(&frames, &rec.path("frames"), DEFAULT_DEPTH_SCALE)?;
        rec.output_dir("frames")?;
    }
    println!(
        "{} points ({} outliers), {} furniture instances, area {:.4} m², height {:.4} m: {}",
        scene.cloud.len(),
        truth.outliers,
        truth.furniture.len(),
        truth.area,
        truth.height,
        rec.out().display()
    );
    rec.write(0)
}
