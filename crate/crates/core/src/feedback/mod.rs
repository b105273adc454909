//! Feedback for the generating agent: grammar problems, diagnoses of failed
//! solves with hints about free space, and evaluation of solved scenes.
//! Every report carries structured entries plus the rendered prose that is
//! sent back to the agent.

mod metrics;
mod regions;
mod text;
mod vqa;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::dsl::{GrammarIssue, Position, PredicateProgram, SolvedFlags, SyntaxError};
use crate::physical::PhysicalError;
use crate::physics::SimulationBackend;
use crate::scene::SceneState;
use crate::spatial::{SolverFailure, Violation};
use crate::stability::{
    estimate_p_fail, sample_dataset, PerturbationSpec, PerturbationVector, StabilityError,
};

pub use metrics::{scene_metrics, SceneMetrics};
pub use regions::{default_min_area, detect_empty_regions, Direction, EmptyRegion, SurfaceRaster};
pub use text::{grammar_sentence, issue_sentence, render_text};
pub use vqa::{
    parse_vqa_response, vqa_question, vqa_request, HttpVqaClient, VqaClient, VqaOutcome,
};

/// Version of the report JSON layout.
pub const REPORT_VERSION: u32 = 1;

/// Most empty regions kept in a report, largest first.
pub const MAX_REPORTED_REGIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Grammar,
    Failure,
    Success,
}

/// One problem found in a program or a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    Syntax {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entry: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        line: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<usize>,
    },
    Grammar {
        issue: GrammarIssue,
    },
    Unsolved {
        object: String,
        missing: Vec<String>,
    },
    Penetration {
        a: String,
        b: String,
        /// Overlapping footprint area, m².
        area: f64,
    },
    OutOfBounds {
        object: String,
        /// How far the footprint sticks out, meters.
        distance: f64,
    },
    NoSupportedPlacement {
        object: String,
        target: String,
        feasible_offsets: usize,
    },
    StackInfeasible {
        object: String,
        target: String,
        tried: usize,
        candidates: usize,
    },
    TargetNotSupporting {
        object: String,
    },
    UnknownTarget {
        object: String,
    },
    RetrievalFailed {
        object: String,
    },
    NoCavity {
        container: String,
    },
    ContainerOverflow {
        container: String,
        placed: Vec<String>,
        failed: Vec<String>,
    },
    Fell {
        object: String,
    },
    Internal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<String>,
        message: String,
    },
}

impl Issue {
    pub fn from_syntax(e: &SyntaxError) -> Self {
        let (entry, line, column) = match e.position {
            Position::Entry(i) => (Some(i), None, None),
            Position::Text { line, column } => (None, Some(line), Some(column)),
        };
        Issue::Syntax {
            message: e.message.clone(),
            entry,
            line,
            column,
        }
    }

    pub fn from_unsolved(object: &str, flags: &SolvedFlags) -> Self {
        Issue::Unsolved {
            object: object.into(),
            missing: flags.missing().into_iter().map(String::from).collect(),
        }
    }

    pub fn from_violation(v: &Violation) -> Self {
        match v {
            Violation::Overlap { a, b, area } => Issue::Penetration {
                a: a.clone(),
                b: b.clone(),
                area: *area,
            },
            Violation::OutOfBounds { id, distance } => Issue::OutOfBounds {
                object: id.clone(),
                distance: *distance,
            },
        }
    }

    pub fn from_physical(e: &PhysicalError) -> Self {
        match e {
            PhysicalError::NoFeasiblePlacement {
                object,
                target,
                feasible_offsets,
            } => Issue::NoSupportedPlacement {
                object: object.clone(),
                target: target.clone(),
                feasible_offsets: *feasible_offsets,
            },
            PhysicalError::PhysicsRejection {
                object,
                target,
                tried,
                candidates,
            } => Issue::StackInfeasible {
                object: object.clone(),
                target: target.clone(),
                tried: *tried,
                candidates: *candidates,
            },
            PhysicalError::TargetNotSupporting(t) => {
                Issue::TargetNotSupporting { object: t.clone() }
            }
            PhysicalError::UnknownTarget(t) => Issue::UnknownTarget { object: t.clone() },
            PhysicalError::ContainerHasNoCavity(c) => Issue::NoCavity {
                container: c.clone(),
            },
            PhysicalError::BatchPartiallyPlaced {
                container,
                placed,
                failed,
            } => Issue::ContainerOverflow {
                container: container.clone(),
                placed: placed.clone(),
                failed: failed.clone(),
            },
            PhysicalError::Retrieval(c) => Issue::RetrievalFailed { object: c.clone() },
            e => Issue::Internal {
                object: e.object().map(String::from),
                message: e.to_string(),
            },
        }
    }

    /// Object ids the issue is about, primary object first.
    pub fn objects(&self) -> Vec<&str> {
        match self {
            Issue::Penetration { a, b, .. } => vec![a, b],
            Issue::NoSupportedPlacement { object, target, .. }
            | Issue::StackInfeasible { object, target, .. } => vec![object, target],
            Issue::Unsolved { object, .. }
            | Issue::OutOfBounds { object, .. }
            | Issue::TargetNotSupporting { object }
            | Issue::UnknownTarget { object }
            | Issue::RetrievalFailed { object }
            | Issue::Fell { object } => vec![object],
            Issue::NoCavity { container } | Issue::ContainerOverflow { container, .. } => {
                vec![container]
            }
            Issue::Internal { object, .. } => object.iter().map(String::as_str).collect(),
            Issue::Syntax { .. } | Issue::Grammar { .. } => vec![],
        }
    }

    /// Statement index the issue is tied to, if any: the entry of a grammar
    /// or syntax problem, else the entry that describes the primary object.
    pub fn entry(&self, program: Option<&PredicateProgram>) -> Option<usize> {
        match self {
            Issue::Grammar { issue } => Some(issue.entry()),
            Issue::Syntax { entry, .. } => *entry,
            _ => {
                let first = *self.objects().first()?;
                program?
                    .descriptions()
                    .find(|(_, id, _)| *id == first)
                    .map(|(i, _, _)| i)
            }
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Issue::Syntax { .. } => 0,
            Issue::Grammar { .. } => 1,
            Issue::Unsolved { .. } => 2,
            Issue::Penetration { .. } => 3,
            Issue::OutOfBounds { .. } => 4,
            Issue::NoSupportedPlacement { .. } => 5,
            Issue::StackInfeasible { .. } => 6,
            Issue::TargetNotSupporting { .. } => 7,
            Issue::UnknownTarget { .. } => 8,
            Issue::RetrievalFailed { .. } => 9,
            Issue::NoCavity { .. } => 10,
            Issue::ContainerOverflow { .. } => 11,
            Issue::Fell { .. } => 12,
            Issue::Internal { .. } => 13,
        }
    }
}

/// Sorts issues by statement index (unindexed last), then object ids, then kind.
pub fn sort_issues(issues: &mut [Issue], program: Option<&PredicateProgram>) {
    issues.sort_by(|a, b| {
        let key = |i: &Issue| {
            (
                i.entry(program).unwrap_or(usize::MAX),
                i.objects()
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>(),
                i.kind_rank(),
            )
        };
        key(a).cmp(&key(b))
    });
}

/// Metrics attached to failure (crowding) and success reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetrics {
    /// Mean probability of standing under perturbation; success reports only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability_score: Option<f64>,
    pub surface_coverage: f64,
    pub compactness: f64,
    pub object_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_vqa: Option<VqaOutcome>,
}

impl From<SceneMetrics> for ReportMetrics {
    fn from(m: SceneMetrics) -> Self {
        Self {
            stability_score: None,
            surface_coverage: m.surface_coverage,
            compactness: m.compactness,
            object_count: m.object_count,
            external_vqa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub version: u32,
    pub channel: Channel,
    pub issues: Vec<Issue>,
    pub empty_regions: Vec<EmptyRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ReportMetrics>,
    pub text: String,
}

impl FeedbackReport {
    fn finish(
        channel: Channel,
        issues: Vec<Issue>,
        empty_regions: Vec<EmptyRegion>,
        metrics: Option<ReportMetrics>,
    ) -> Self {
        let mut r = Self {
            version: REPORT_VERSION,
            channel,
            issues,
            empty_regions,
            metrics,
            text: String::new(),
        };
        r.text = render_text(&r);
        r
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Report for a program that failed to parse, broke a grammar rule, or left
/// objects undetermined.
pub fn grammar_report(
    mut issues: Vec<Issue>,
    program: Option<&PredicateProgram>,
) -> FeedbackReport {
    sort_issues(&mut issues, program);
    FeedbackReport::finish(Channel::Grammar, issues, Vec::new(), None)
}

/// A failed solve.
#[derive(Debug, Clone, Copy)]
pub enum Failure<'a> {
    Spatial(&'a SolverFailure),
    Physical(&'a PhysicalError),
    /// Objects that fell when the finished scene was settled.
    Fell(&'a [String]),
}

impl Failure<'_> {
    pub fn issues(&self) -> Vec<Issue> {
        match self {
            Failure::Spatial(f) => f.violations.iter().map(Issue::from_violation).collect(),
            Failure::Physical(e) => vec![Issue::from_physical(e)],
            Failure::Fell(ids) => ids
                .iter()
                .map(|id| Issue::Fell { object: id.clone() })
                .collect(),
        }
    }
}

/// Diagnoses a failed solve. `scene` holds whatever was placed (for a
/// spatial failure, the best layout found); it is used for free-space hints
/// and the crowding estimate.
pub fn diagnose_failure(
    failure: Failure<'_>,
    scene: &SceneState,
    catalog: &Catalog,
    program: Option<&PredicateProgram>,
    resolution: f64,
) -> FeedbackReport {
    let mut issues = failure.issues();
    sort_issues(&mut issues, program);
    let regions = hint_regions(scene, catalog, resolution);
    FeedbackReport::finish(
        Channel::Failure,
        issues,
        regions,
        Some(scene_metrics(scene, catalog).into()),
    )
}

fn hint_regions(scene: &SceneState, catalog: &Catalog, resolution: f64) -> Vec<EmptyRegion> {
    let mut regions =
        detect_empty_regions(scene, catalog, resolution, default_min_area(scene, catalog));
    regions.truncate(MAX_REPORTED_REGIONS);
    regions
}

/// Settings for evaluating a solved scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessOptions {
    /// Perturbation samples per object.
    pub samples: usize,
    pub seed: u64,
    pub resolution: f64,
    /// Scene description handed to the VQA scorer.
    pub prompt: String,
}

impl Default for SuccessOptions {
    fn default() -> Self {
        Self {
            samples: PerturbationSpec::DEFAULT_SAMPLES,
            seed: 0,
            resolution: crate::physical::TABLETOP_RESOLUTION,
            prompt: String::new(),
        }
    }
}

/// Mean over objects of the probability of standing at the placed state;
/// 1 for an empty scene.
pub fn stability_score(
    scene: &SceneState,
    catalog: &Catalog,
    backend: &dyn SimulationBackend,
    samples: usize,
    seed: u64,
) -> Result<f64, StabilityError> {
    if scene.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for (o, a) in scene.with_assets(catalog) {
        let spec = PerturbationSpec::for_asset(a).with_samples(samples);
        let data = sample_dataset(scene, catalog, &o.id, &spec, backend, seed)?;
        total += 1.0 - estimate_p_fail(&PerturbationVector::zero(), &data, &spec)?.p_fail;
    }
    Ok(total / scene.len() as f64)
}

/// Evaluates a solved scene: stability, layout metrics, free space and,
/// when a client is given, the external VQA score. A failing VQA client is
/// recorded in the report rather than returned as an error.
pub fn success_report(
    scene: &SceneState,
    catalog: &Catalog,
    backend: &dyn SimulationBackend,
    options: &SuccessOptions,
    vqa: Option<&dyn VqaClient>,
) -> Result<FeedbackReport, StabilityError> {
    let mut metrics: ReportMetrics = scene_metrics(scene, catalog).into();
    metrics.stability_score = Some(stability_score(
        scene,
        catalog,
        backend,
        options.samples,
        options.seed,
    )?);
    metrics.external_vqa = vqa.map(|client| {
        let svg = crate::render::render_svg(scene, catalog);
        match client.yes_probability(&svg, &options.prompt) {
            Ok(p) => VqaOutcome::Score { value: p },
            Err(reason) => VqaOutcome::Unavailable { reason },
        }
    });
    let regions = hint_regions(scene, catalog, options.resolution);
    Ok(FeedbackReport::finish(
        Channel::Success,
        Vec::new(),
        regions,
        Some(metrics),
    ))
}
