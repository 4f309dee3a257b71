//! End-to-end layout: envelope, model placement, constraint resolution and
//! the final document.

use std::sync::Arc;

use thiserror::Error;

use crate::constraints::{finalize_layout, resolve_layout, FinalLayout, Layout, LayoutItem, ResolveOptions, ResolveReport};
use crate::envelope::{build_envelope, EnvelopeError, RoomEnvelope};
use crate::io::{ModelDatabase, OutputMode, Provenance, SegmentedScene};
use crate::registration::{evaluate_scene, EvalOptions, Method, RegistrationError, SceneReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Constraint(#[from] crate::constraints::ConstraintError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutConfig {
    pub mode: OutputMode,
    /// Instances replaced in hybrid mode.
    pub keep: Vec<u32>,
    pub eval: EvalOptions,
    pub resolve: ResolveOptions,
    /// File name for the hybrid pass-through cloud.
    pub pass_through_name: String,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            mode: OutputMode::Virtual,
            keep: Vec::new(),
            eval: EvalOptions::default(),
            resolve: ResolveOptions::default(),
            pass_through_name: "pass_through.ply".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayoutRun {
    pub envelope: RoomEnvelope,
    pub fitted: SceneReport,
    pub baseline: SceneReport,
    pub resolved: Layout,
    pub resolve_report: ResolveReport,
    pub output: FinalLayout,
}

pub fn run_layout(
    scene: &SegmentedScene,
    db: &ModelDatabase,
    config: &LayoutConfig,
    provenance: Provenance,
) -> Result<LayoutRun, PipelineError> {
    let envelope = build_envelope(scene)?;
    let frame = envelope.floor.frame;
    let fitted = evaluate_scene(scene, db, &frame, Method::Fitted, config.eval)?;
    let baseline = evaluate_scene(scene, db, &frame, Method::Baseline, config.eval)?;
    let items = fitted
        .results
        .iter()
        .map(|r| LayoutItem {
            instance_id: r.instance_id,
            placement: r.placement.clone(),
            model: Arc::clone(&r.model),
        })
        .collect();
    let layout = Layout::new(envelope.clone(), items);
    let (resolved, resolve_report) = resolve_layout(&layout, config.resolve);
    let output = finalize_layout(
        &resolved,
        &resolve_report,
        scene,
        config.mode,
        &config.keep,
        provenance,
        &config.pass_through_name,
    )?;
    Ok(LayoutRun {
        envelope,
        fitted,
        baseline,
        resolved,
        resolve_report,
        output,
    })
}
