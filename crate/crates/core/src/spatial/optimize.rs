use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::apply::{Layout, ParamKind, ParamVector, SpatialProblem};
use super::penalty::{penalty_breakdown, Violation};
use super::{normalize_angle, SpatialError};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub outer_iterations: usize,
    /// Random candidates per parameter update (the current value is always added).
    pub candidates: usize,
    /// Acceptance threshold on the total penalty (m²-like units).
    pub epsilon: f64,
    /// Sampling half-range for distances and coordinates, as a fraction of the
    /// shortest surface side.
    pub linear_fraction: f64,
    /// Sampling half-range for angles, radians.
    pub angle_half_range: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 10,
            candidates: 40,
            epsilon: 1e-4,
            linear_fraction: 0.1,
            angle_half_range: 10f64.to_radians(),
        }
    }
}

/// One coordinate update, recorded for auditing monotonicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub iteration: usize,
    pub param: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvedLayout {
    pub layout: Layout,
    pub penalty: f64,
    pub params: ParamVector,
    /// Outer iterations run before acceptance.
    pub iterations: usize,
    pub trace: Vec<DescentStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverFailure {
    pub best_layout: Layout,
    pub penalty: f64,
    pub violations: Vec<Violation>,
    pub params: ParamVector,
    pub trace: Vec<DescentStep>,
}

/// Coordinate descent over the numeric predicate parameters, sweeping them
/// in statement order. Each update samples uniform candidates around the
/// current value and keeps the best, the current value included, so the
/// penalty never increases.
pub fn optimize(
    problem: &SpatialProblem<'_>,
    config: &OptimizeConfig,
) -> Result<SolvedLayout, SpatialError> {
    let eval = |params: &ParamVector| -> Result<(Layout, f64), SpatialError> {
        let layout = problem.apply(params)?;
        let p = penalty_breakdown(
            &layout.poses,
            &layout.assets,
            problem.catalog,
            &problem.bounds,
        )
        .0;
        Ok((layout, p))
    };
    let b = problem.bounds;
    let linear = config.linear_fraction * b.shortest_side();
    let mut rng = stream(problem.seed, "coordinate-descent");
    let mut params = problem.initial.clone();
    let (mut layout, mut current) = eval(&params)?;
    let mut trace = Vec::new();
    let mut iterations = 0;

    while current >= config.epsilon && iterations < config.outer_iterations && !params.is_empty() {
        for k in 0..params.len() {
            let p = &params.entries[k];
            let half = if p.kind == ParamKind::Angle {
                config.angle_half_range
            } else {
                linear
            };
            let mut values = vec![p.value];
            for _ in 0..config.candidates {
                let v = p.value + rng.random_range(-half..=half);
                values.push(match p.kind {
                    ParamKind::Distance => v.max(0.0),
                    ParamKind::Angle => normalize_angle(v),
                    ParamKind::Coordinate if p.key == "x" => v.clamp(b.min_x, b.max_x),
                    ParamKind::Coordinate => v.clamp(b.min_y, b.max_y),
                });
            }
            let scored: Vec<Result<(Layout, f64), SpatialError>> = values
                .par_iter()
                .map(|&v| {
                    let mut trial = params.clone();
                    trial.entries[k].value = v;
                    eval(&trial)
                })
                .collect();
            let before = current;
            // The current value is index 0, so ties keep it.
            let mut best = 0;
            let mut best_penalty = current;
            for (idx, r) in scored.iter().enumerate().skip(1) {
                let (_, pen) = r.as_ref().map_err(Clone::clone)?;
                if *pen < best_penalty {
                    best = idx;
                    best_penalty = *pen;
                }
            }
            if best != 0 {
                params.entries[k].value = values[best];
                let (l, pen) = scored.into_iter().nth(best).expect("index in range")?;
                layout = l;
                current = pen;
            }
            trace.push(DescentStep {
                iteration: iterations,
                param: k,
                before,
                after: current,
            });
        }
        iterations += 1;
    }

    if current < config.epsilon {
        Ok(SolvedLayout {
            layout,
            penalty: current,
            params,
            iterations,
            trace,
        })
    } else {
        let (_, violations) = penalty_breakdown(
            &layout.poses,
            &layout.assets,
            problem.catalog,
            &problem.bounds,
        );
        Err(SpatialError::Failure(Box::new(SolverFailure {
            best_layout: layout,
            penalty: current,
            violations,
            params,
            trace,
        })))
    }
}
