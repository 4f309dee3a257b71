use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use super::{
    baseline_placement, derive_seed, fit_placement, retrieve_candidates, CandidateModel, FitOptions, Placement,
    RegistrationError, DEFAULT_SAMPLES,
};
use crate::envelope::FloorFrame;
use crate::geom::{GeomError, PointCloud};
use crate::io::{ModelDatabase, SegmentedScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Baseline,
    Fitted,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Fitted => "fitted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Candidates drawn per instance.
    pub candidates: usize,
    pub samples: usize,
    pub fit: FitOptions,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            candidates: 5,
            samples: DEFAULT_SAMPLES,
            fit: FitOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub instance_id: u32,
    pub category: String,
    pub placement: Placement,
    pub model: Arc<CandidateModel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedInstance {
    pub instance_id: u32,
    pub category: String,
    pub reason: String,
}

/// Per-instance chamfer scores with their mean and population standard
/// deviation.
#[derive(Debug, Clone)]
pub struct SceneReport {
    pub method: Method,
    pub results: Vec<InstanceResult>,
    pub skipped: Vec<SkippedInstance>,
    pub mean: f64,
    pub std: f64,
}

impl SceneReport {
    fn new(method: Method, results: Vec<InstanceResult>, skipped: Vec<SkippedInstance>) -> Self {
        let n = results.len() as f64;
        let (mean, std) = if results.is_empty() {
            (0.0, 0.0)
        } else {
            let mean = results.iter().map(|r| r.placement.score).sum::<f64>() / n;
            let var = results.iter().map(|r| (r.placement.score - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        Self {
            method,
            results,
            skipped,
            mean,
            std,
        }
    }

    /// Per-instance rows followed by a `mean (±std)` summary row.
    pub fn to_text(&self, scene_name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:<12} {:<24} {:>10}", "instance", "category", "model", "Dist");
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<10} {:<12} {:<24} {:>10.4}",
                r.instance_id, r.category, r.placement.model_id, r.placement.score
            );
        }
        for k in &self.skipped {
            let _ = writeln!(s, "{:<10} {:<12} skipped: {}", k.instance_id, k.category, k.reason);
        }
        let _ = writeln!(
            s,
            "{:<10} {:<12} Dist {:.4} (±{:.4}) over {} instances (population std)",
            self.method.name(),
            scene_name,
            self.mean,
            self.std,
            self.results.len()
        );
        s
    }
}

/// Lowest-scoring placement over the candidates; ties keep the earlier one.
pub fn fit_best(
    target: &PointCloud,
    candidates: &[Arc<CandidateModel>],
    frame: &FloorFrame,
    method: Method,
    options: FitOptions,
) -> Result<Option<(Placement, Arc<CandidateModel>)>, RegistrationError> {
    let mut best: Option<(Placement, Arc<CandidateModel>)> = None;
    for c in candidates {
        let p = match method {
            Method::Baseline => baseline_placement(target, c, frame)?,
            Method::Fitted => fit_placement(target, c, frame, options)?,
        };
        if best.as_ref().is_none_or(|(b, _)| p.score < b.score) {
            best = Some((p, Arc::clone(c)));
        }
    }
    Ok(best)
}

/// Places every furniture instance with the best of `options.candidates`
/// catalog models. Candidate draws depend only on the seed and instance id,
/// so both methods see the same models.
pub fn evaluate_scene(
    scene: &SegmentedScene,
    db: &ModelDatabase,
    frame: &FloorFrame,
    method: Method,
    options: EvalOptions,
) -> Result<SceneReport, RegistrationError> {
    let instances: Vec<_> = scene.furniture().collect();
    let outcomes: Vec<Result<Result<InstanceResult, SkippedInstance>, RegistrationError>> = instances
        .par_iter()
        .map(|inst| {
            let skip = |reason: String| {
                Ok(Err(SkippedInstance {
                    instance_id: inst.id,
                    category: inst.label.clone(),
                    reason,
                }))
            };
            if db.models_in(&inst.label).is_empty() {
                return skip("category not in database".into());
            }
            let seed = derive_seed(options.seed, &inst.id.to_le_bytes());
            let candidates: Vec<Arc<CandidateModel>> =
                retrieve_candidates(db, &inst.label, options.candidates, seed, options.samples)?
                    .into_iter()
                    .map(Arc::new)
                    .collect();
            let target = scene.instance_cloud(inst);
            match fit_best(&target, &candidates, frame, method, options.fit) {
                Ok(Some((placement, model))) => Ok(Ok(InstanceResult {
                    instance_id: inst.id,
                    category: inst.label.clone(),
                    placement,
                    model,
                })),
                Ok(None) => skip("no candidates".into()),
                Err(RegistrationError::Geom(e @ (GeomError::DegenerateCloud(_) | GeomError::EmptyCloud))) => {
                    skip(format!("target unusable: {e}"))
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o? {
            Ok(r) => results.push(r),
            Err(s) => skipped.push(s),
        }
    }
    Ok(SceneReport::new(method, results, skipped))
}
