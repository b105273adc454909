//! End-to-end solve of a predicate program: parse, grammar and solvedness
//! checks, the spatial stage, then the physical statements, then a final
//! settle of the whole scene.
//!
//! Physical statements run after every spatial one, in three passes over
//! the program: PLACE-ON, then PLACE-ANYWHERE, then PLACE-IN. Within a pass
//! statements keep their program order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AssetRecord, Catalog};
use crate::dsl::{
    analyze_solvedness, parse_program, unsolved_objects, validate_grammar, GrammarIssue,
    PredicateProgram, Relation, SolvedFlags, Statement, Subject, SyntaxError,
};
use crate::feedback::{diagnose_failure, grammar_report, Failure, FeedbackReport, Issue};
use crate::physical::{
    place_anywhere, place_in, place_items_in, place_on, GridParams, PhysicalError, PlaceParams,
    PlacementRequest,
};
use crate::physics::{SimulationBackend, DEFAULT_SETTLE_STEPS};
use crate::scene::{PlacedObject, SceneState};
use crate::spatial::{
    optimize, Bounds2D, DescentStep, OptimizeConfig, SolverFailure, SpatialError, SpatialProblem,
};

/// Settings shared by every stage of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub seed: u64,
    pub optimize: OptimizeConfig,
    pub grid: GridParams,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            optimize: OptimizeConfig::default(),
            grid: GridParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub program: PredicateProgram,
    pub scene: SceneState,
    /// Spatial penalty at acceptance.
    pub penalty: f64,
    /// Outer descent iterations used by the spatial stage.
    pub iterations: usize,
    pub trace: Vec<DescentStep>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{} grammar issue(s)", .issues.len())]
    Grammar {
        program: PredicateProgram,
        issues: Vec<GrammarIssue>,
    },
    #[error("{} object(s) are not fully determined", .objects.len())]
    Unsolved {
        program: PredicateProgram,
        objects: Vec<(String, SolvedFlags)>,
    },
    #[error("spatial evaluation failed: {error}")]
    Spatial {
        program: PredicateProgram,
        error: SpatialError,
    },
    #[error("the spatial penalty stayed at {}", .failure.penalty)]
    Infeasible {
        program: PredicateProgram,
        failure: Box<SolverFailure>,
        /// Best layout found, as a scene.
        scene: SceneState,
    },
    #[error("{error}")]
    Physical {
        program: PredicateProgram,
        error: PhysicalError,
        /// Objects placed before the failing statement.
        scene: SceneState,
    },
    #[error("{} object(s) fell when the scene was settled", .objects.len())]
    Fell {
        program: PredicateProgram,
        objects: Vec<String>,
        scene: SceneState,
    },
}

impl SolveError {
    pub fn program(&self) -> Option<&PredicateProgram> {
        match self {
            SolveError::Syntax(_) => None,
            SolveError::Grammar { program, .. }
            | SolveError::Unsolved { program, .. }
            | SolveError::Spatial { program, .. }
            | SolveError::Infeasible { program, .. }
            | SolveError::Physical { program, .. }
            | SolveError::Fell { program, .. } => Some(program),
        }
    }

    /// Whatever was placed before the failure.
    pub fn partial_scene(&self) -> Option<&SceneState> {
        match self {
            SolveError::Infeasible { scene, .. }
            | SolveError::Physical { scene, .. }
            | SolveError::Fell { scene, .. } => Some(scene),
            _ => None,
        }
    }

    /// True when the program failed to parse.
    pub fn is_syntax(&self) -> bool {
        matches!(self, SolveError::Syntax(_))
    }

    /// Feedback for the failure: grammar channel for problems with the
    /// program text, failure channel for problems found while solving.
    pub fn report(&self, catalog: &Catalog, resolution: f64) -> FeedbackReport {
        match self {
            SolveError::Syntax(e) => grammar_report(vec![Issue::from_syntax(e)], None),
            SolveError::Grammar { program, issues } => grammar_report(
                issues
                    .iter()
                    .map(|i| Issue::Grammar { issue: i.clone() })
                    .collect(),
                Some(program),
            ),
            SolveError::Unsolved { program, objects } => grammar_report(
                objects
                    .iter()
                    .map(|(id, f)| Issue::from_unsolved(id, f))
                    .collect(),
                Some(program),
            ),
            SolveError::Spatial { program, error } => {
                let issue = match error {
                    SpatialError::UnsolvedObject(id) => Issue::Unsolved {
                        object: id.clone(),
                        missing: Vec::new(),
                    },
                    SpatialError::Retrieval(id) => Issue::RetrievalFailed { object: id.clone() },
                    e => Issue::Internal {
                        object: None,
                        message: e.to_string(),
                    },
                };
                grammar_report(vec![issue], Some(program))
            }
            SolveError::Infeasible {
                program,
                failure,
                scene,
            } => diagnose_failure(
                Failure::Spatial(failure),
                scene,
                catalog,
                Some(program),
                resolution,
            ),
            SolveError::Physical {
                program,
                error,
                scene,
            } => diagnose_failure(
                Failure::Physical(error),
                scene,
                catalog,
                Some(program),
                resolution,
            ),
            SolveError::Fell {
                program,
                objects,
                scene,
            } => diagnose_failure(
                Failure::Fell(objects),
                scene,
                catalog,
                Some(program),
                resolution,
            ),
        }
    }
}

/// Parses and solves `text`.
pub fn solve_text(
    text: &str,
    catalog: &Catalog,
    bounds: Bounds2D,
    backend: &dyn SimulationBackend,
    config: &SolveConfig,
) -> Result<Solved, SolveError> {
    solve_program(parse_program(text)?, catalog, bounds, backend, config)
}

/// Checks `program` and realizes it on `bounds`.
pub fn solve_program(
    program: PredicateProgram,
    catalog: &Catalog,
    bounds: Bounds2D,
    backend: &dyn SimulationBackend,
    config: &SolveConfig,
) -> Result<Solved, SolveError> {
    let issues = validate_grammar(&program, catalog);
    if !issues.is_empty() {
        return Err(SolveError::Grammar { program, issues });
    }
    let unsolved = unsolved_objects(&program, &analyze_solvedness(&program));
    if !unsolved.is_empty() {
        return Err(SolveError::Unsolved {
            program,
            objects: unsolved,
        });
    }

    let spatial = {
        let problem = match SpatialProblem::new(&program, catalog, bounds, config.seed) {
            Ok(p) => p,
            Err(error) => return Err(SolveError::Spatial { program, error }),
        };
        optimize(&problem, &config.optimize).map(|s| (s, problem.bindings.clone()))
    };
    let (solved, bindings) = match spatial {
        Ok(s) => s,
        Err(SpatialError::Failure(failure)) => {
            let scene = layout_scene(
                &failure.best_layout.poses,
                &failure.best_layout.assets,
                catalog,
                bounds,
            );
            return Err(SolveError::Infeasible {
                program,
                failure,
                scene,
            });
        }
        Err(error) => return Err(SolveError::Spatial { program, error }),
    };

    let mut scene = layout_scene(&solved.layout.poses, &solved.layout.assets, catalog, bounds);
    let yaw_of = |id: &str| solved.layout.physical_yaws.get(id).copied().unwrap_or(0.0);
    let asset_of = |id: &str| -> &AssetRecord {
        catalog
            .get(&bindings[id])
            .expect("bindings come from the catalog")
    };

    let passes: [fn(&Relation) -> bool; 3] = [
        |r| *r == Relation::PlaceOn,
        |r| *r == Relation::PlaceAnywhere,
        |r| *r == Relation::PlaceIn,
    ];
    for pass in passes {
        let statements: Vec<&Statement> = program
            .statements()
            .filter(|(_, s)| pass(&s.relation))
            .map(|(_, s)| s)
            .collect();
        for s in statements {
            if let Err(error) =
                physical_statement(s, &mut scene, catalog, backend, config, &yaw_of, &asset_of)
            {
                return Err(SolveError::Physical {
                    program,
                    error,
                    scene,
                });
            }
        }
    }

    let settled = match backend.settle(&scene, catalog, DEFAULT_SETTLE_STEPS) {
        Ok(r) => r,
        Err(e) => {
            return Err(SolveError::Physical {
                program,
                error: e.into(),
                scene,
            })
        }
    };
    let fell: Vec<String> = settled
        .objects
        .iter()
        .filter(|b| b.fell)
        .map(|b| b.id.clone())
        .collect();
    if !fell.is_empty() {
        return Err(SolveError::Fell {
            program,
            objects: fell,
            scene,
        });
    }
    Ok(Solved {
        program,
        scene: settled.apply_to(&scene),
        penalty: solved.penalty,
        iterations: solved.iterations,
        trace: solved.trace,
    })
}

fn layout_scene(
    poses: &std::collections::BTreeMap<String, crate::spatial::Pose>,
    assets: &std::collections::BTreeMap<String, String>,
    catalog: &Catalog,
    bounds: Bounds2D,
) -> SceneState {
    let mut scene = SceneState::new(bounds);
    for (id, pose) in poses {
        if let Some(asset) = assets.get(id).and_then(|a| catalog.get(a)) {
            scene.objects.push(PlacedObject::nominal(id, asset, *pose));
        }
    }
    scene
}

fn physical_statement<'c>(
    s: &Statement,
    scene: &mut SceneState,
    catalog: &'c Catalog,
    backend: &dyn SimulationBackend,
    config: &SolveConfig,
    yaw_of: &dyn Fn(&str) -> f64,
    asset_of: &dyn Fn(&str) -> &'c AssetRecord,
) -> Result<(), PhysicalError> {
    let target = s.reference.id().unwrap_or(crate::dsl::ROOT).to_string();
    let grid = &config.grid;
    match (&s.subject, &s.relation) {
        (Subject::Id(id), Relation::PlaceOn | Relation::PlaceAnywhere) => {
            let asset = asset_of(id);
            let req = PlacementRequest {
                id: id.clone(),
                asset,
                yaw: yaw_of(id),
                target,
                params: PlaceParams::from_statement(s),
            };
            let outcome = if s.relation == Relation::PlaceOn {
                place_on(scene, catalog, &req, grid, backend, config.seed)?
            } else {
                place_anywhere(scene, catalog, &req, grid, backend, config.seed)?
            };
            scene
                .objects
                .push(PlacedObject::nominal(id, asset, outcome.pose));
        }
        (Subject::Id(id), Relation::PlaceIn) => {
            let items = [(id.clone(), asset_of(id))];
            place_items_in(scene, catalog, &target, &items, grid, backend, config.seed)?;
        }
        (Subject::Batch(batch), Relation::PlaceIn) => {
            place_in(scene, catalog, &target, batch, grid, backend, config.seed)?;
        }
        _ => {}
    }
    Ok(())
}
