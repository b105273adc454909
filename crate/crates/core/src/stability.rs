//! Perturbation-based stability estimation.
//!
//! A perturbation is an 11-dimensional offset from an object's placed state
//! (position, axis–angle rotation, centre-of-mass shift, friction, mass).
//! Samples drawn from a diagonal Gaussian are labelled fell/stood by a
//! backend, and the failure probability at a query point is the
//! kernel-weighted fraction of falls, with Gaussian weights in the
//! Mahalanobis distance of the sampling covariance.

use nalgebra::Rotation3;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AssetRecord, Catalog};
use crate::geometry::Vector3;
use crate::physics::{PhysicsError, SimulationBackend, DEFAULT_SETTLE_STEPS};
use crate::rng::stream;
use crate::scene::{PlacedObject, SceneState};

/// Number of perturbation components.
pub const DIM: usize = 11;

/// Draws per sample before rejection sampling gives up.
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationVector {
    /// Position offset, meters.
    pub dp: Vector3,
    /// Axis–angle rotation, radians.
    pub dr: Vector3,
    /// Centre-of-mass shift offset, meters.
    pub dc: Vector3,
    pub dmu: f64,
    /// kg
    pub dm: f64,
}

impl PerturbationVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; DIM] {
        let (p, r, c) = (self.dp, self.dr, self.dc);
        [
            p.x, p.y, p.z, r.x, r.y, r.z, c.x, c.y, c.z, self.dmu, self.dm,
        ]
    }

    pub fn from_array(a: [f64; DIM]) -> Self {
        Self {
            dp: Vector3::new(a[0], a[1], a[2]),
            dr: Vector3::new(a[3], a[4], a[5]),
            dc: Vector3::new(a[6], a[7], a[8]),
            dmu: a[9],
            dm: a[10],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// The object in `base` moved by this perturbation. Rotation is applied
    /// on top of any existing tilt.
    pub fn apply(&self, base: &PlacedObject) -> PlacedObject {
        let mut o = base.clone();
        o.pose.position += self.dp;
        if self.dr.norm() > 0.0 {
            o.tilt = (Rotation3::new(self.dr) * Rotation3::new(base.tilt)).scaled_axis();
        }
        o.com_shift += self.dc;
        o.friction += self.dmu;
        o.mass += self.dm;
        o
    }

    /// Whether the perturbed object has physical parameters: positive mass,
    /// non-negative friction and a centre of mass within the asset's range.
    /// Assets with a degenerate shift range on an axis only keep the centre
    /// of mass inside their bounding box on that axis.
    pub fn admissible(&self, base: &PlacedObject, asset: &AssetRecord) -> bool {
        let o = self.apply(base);
        if !self.is_finite() || o.mass <= 0.0 || o.friction < 0.0 {
            return false;
        }
        let ext = asset.shape.extent();
        (0..3).all(|i| {
            let [lo, hi] = asset.com_shift_range[i];
            let c = o.com_shift[i];
            if hi > lo {
                (lo..=hi).contains(&c)
            } else {
                c.abs() <= 0.5 * ext[i]
            }
        })
    }
}

/// Sampling standard deviations and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub theta: [f64; DIM],
    pub samples: usize,
}

impl PerturbationSpec {
    pub const DEFAULT_SAMPLES: usize = 50;
    pub const POSITION_STD: f64 = 0.005;
    pub const ROTATION_STD_DEG: f64 = 2.0;
    /// Fraction of the asset extent, per axis.
    pub const COM_STD_FRACTION: f64 = 0.1;
    pub const FRICTION_STD: f64 = 0.05;
    /// Fraction of the nominal mass.
    pub const MASS_STD_FRACTION: f64 = 0.1;

    /// Default deviations scaled to `asset`.
    pub fn for_asset(asset: &AssetRecord) -> Self {
        let ext = asset.shape.extent();
        let p = Self::POSITION_STD;
        let r = Self::ROTATION_STD_DEG.to_radians();
        let c = Self::COM_STD_FRACTION;
        Self {
            theta: [
                p,
                p,
                p,
                r,
                r,
                r,
                c * ext.x,
                c * ext.y,
                c * ext.z,
                Self::FRICTION_STD,
                Self::MASS_STD_FRACTION * asset.nominal_mass(),
            ],
            samples: Self::DEFAULT_SAMPLES,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn validate(&self) -> Result<(), StabilityError> {
        if self.samples == 0 {
            return Err(StabilityError::InvalidSpec(
                "sample count must be at least 1".into(),
            ));
        }
        if let Some(i) = self.theta.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(StabilityError::InvalidSpec(format!(
                "deviation {i} must be positive and finite"
            )));
        }
        Ok(())
    }

    /// Squared Mahalanobis distance between two perturbations.
    pub fn mahalanobis_sq(&self, a: &PerturbationVector, b: &PerturbationVector) -> f64 {
        let (a, b) = (a.to_array(), b.to_array());
        (0..DIM)
            .map(|i| ((a[i] - b[i]) / self.theta[i]).powi(2))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: PerturbationVector,
    /// The scene collapsed under this perturbation.
    pub fell: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDataset {
    pub object: String,
    pub center: PerturbationVector,
    pub samples: Vec<LabeledSample>,
}

impl StabilityDataset {
    pub fn stable(&self) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(|s| !s.fell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub p_fail: f64,
    /// Sum of kernel weights.
    pub effective_weight: f64,
    pub sample_count: usize,
}

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),
    #[error("object `{0}` is not in the scene")]
    UnknownObject(String),
    #[error("the dataset is empty")]
    EmptyDataset,
    #[error("every kernel weight underflowed to zero; the query is far outside the samples")]
    DegenerateWeights,
    #[error("no admissible perturbation of `{0}` found by rejection sampling")]
    SamplingExhausted(String),
    #[error("all {samples} perturbations of `{object}` fell in round {round}")]
    NoStableSample {
        object: String,
        round: usize,
        samples: usize,
        center: PerturbationVector,
    },
    #[error("the final state of `{0}` did not stand on confirmation")]
    Unconfirmed(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// Kernel-weighted failure probability at `query`.
pub fn estimate_p_fail(
    query: &PerturbationVector,
    data: &StabilityDataset,
    spec: &PerturbationSpec,
) -> Result<StabilityEstimate, StabilityError> {
    if data.samples.is_empty() {
        return Err(StabilityError::EmptyDataset);
    }
    let (mut s, mut n) = (0.0, 0.0);
    for sample in &data.samples {
        let w = (-0.5 * spec.mahalanobis_sq(&sample.x, query)).exp();
        n += w;
        if sample.fell {
            s += w;
        }
    }
    if n <= 0.0 {
        return Err(StabilityError::DegenerateWeights);
    }
    Ok(StabilityEstimate {
        p_fail: (s / n).clamp(0.0, 1.0),
        effective_weight: n,
        sample_count: data.samples.len(),
    })
}

fn lookup<'a>(
    scene: &'a SceneState,
    catalog: &'a Catalog,
    object: &str,
) -> Result<(usize, &'a AssetRecord), StabilityError> {
    let idx = scene
        .objects
        .iter()
        .position(|o| o.id == object)
        .ok_or_else(|| StabilityError::UnknownObject(object.into()))?;
    let asset = catalog
        .get(&scene.objects[idx].asset_id)
        .ok_or_else(|| StabilityError::UnknownObject(object.into()))?;
    Ok((idx, asset))
}

/// Whether the scene collapses with `object` perturbed by `x`.
pub fn label(
    scene: &SceneState,
    catalog: &Catalog,
    object: &str,
    x: &PerturbationVector,
    backend: &dyn SimulationBackend,
) -> Result<bool, StabilityError> {
    let (idx, _) = lookup(scene, catalog, object)?;
    let mut trial = scene.clone();
    trial.objects[idx] = x.apply(&scene.objects[idx]);
    Ok(backend
        .settle(&trial, catalog, DEFAULT_SETTLE_STEPS)?
        .any_fell())
}

/// Draws `spec.samples` admissible perturbations around `center` and labels
/// each with the backend. `round` separates the random streams of
/// successive datasets drawn with one seed.
#[allow(clippy::too_many_arguments)]
pub fn sample_dataset_around(
    scene: &SceneState,
    catalog: &Catalog,
    object: &str,
    center: &PerturbationVector,
    spec: &PerturbationSpec,
    backend: &dyn SimulationBackend,
    seed: u64,
    round: usize,
) -> Result<StabilityDataset, StabilityError> {
    spec.validate()?;
    let (idx, asset) = lookup(scene, catalog, object)?;
    let base = &scene.objects[idx];
    let c = center.to_array();
    let draws: Vec<PerturbationVector> = (0..spec.samples)
        .map(|j| {
            let mut rng = stream(seed, &format!("perturb:{object}:{round}:{j}"));
            (0..MAX_REJECTIONS)
                .map(|_| {
                    PerturbationVector::from_array(std::array::from_fn(|i| {
                        c[i] + spec.theta[i] * rng.sample::<f64, _>(StandardNormal)
                    }))
                })
                .find(|x| x.admissible(base, asset))
                .ok_or_else(|| StabilityError::SamplingExhausted(object.into()))
        })
        .collect::<Result<_, _>>()?;
    let samples = draws
        .into_par_iter()
        .map(|x| label(scene, catalog, object, &x, backend).map(|fell| LabeledSample { x, fell }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityDataset {
        object: object.into(),
        center: *center,
        samples,
    })
}

/// Perturbations around the placed state.
pub fn sample_dataset(
    scene: &SceneState,
    catalog: &Catalog,
    object: &str,
    spec: &PerturbationSpec,
    backend: &dyn SimulationBackend,
    seed: u64,
) -> Result<StabilityDataset, StabilityError> {
    sample_dataset_around(
        scene,
        catalog,
        object,
        &PerturbationVector::zero(),
        spec,
        backend,
        seed,
        0,
    )
}

/// Failure probability of `object` at its placed state.
pub fn stability_score(
    scene: &SceneState,
    catalog: &Catalog,
    object: &str,
    spec: &PerturbationSpec,
    backend: &dyn SimulationBackend,
    seed: u64,
) -> Result<f64, StabilityError> {
    let data = sample_dataset(scene, catalog, object, spec, backend, seed)?;
    Ok(estimate_p_fail(&PerturbationVector::zero(), &data, spec)?.p_fail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityStep {
    pub round: usize,
    pub center: PerturbationVector,
    /// Estimated failure probability at the new centre, on this round's samples.
    pub p_fail: f64,
    pub stable_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityResult {
    /// The scene with the object moved to the final centre.
    pub scene: SceneState,
    pub center: PerturbationVector,
    /// Estimate at the placed state on the first round's samples.
    pub initial_p_fail: f64,
    /// Estimate at the final centre on a fresh dataset drawn around it.
    pub final_p_fail: f64,
    pub trace: Vec<InstabilityStep>,
}

/// Moves `object` towards fragile-but-standing states: each round samples
/// around the current centre and re-centres on the standing sample with the
/// highest estimated failure probability. The returned state stands under
/// the backend.
pub fn optimize_instability(
    scene: &SceneState,
    catalog: &Catalog,
    object: &str,
    spec: &PerturbationSpec,
    backend: &dyn SimulationBackend,
    iterations: usize,
    seed: u64,
) -> Result<InstabilityResult, StabilityError> {
    let mut center = PerturbationVector::zero();
    let mut trace = Vec::with_capacity(iterations);
    let mut initial = None;
    for round in 0..iterations {
        let data =
            sample_dataset_around(scene, catalog, object, &center, spec, backend, seed, round)?;
        if initial.is_none() {
            initial = Some(estimate_p_fail(&PerturbationVector::zero(), &data, spec)?.p_fail);
        }
        let mut best: Option<(f64, PerturbationVector)> = None;
        for s in data.stable() {
            let p = estimate_p_fail(&s.x, &data, spec)?.p_fail;
            if best.is_none_or(|(b, _)| p > b) {
                best = Some((p, s.x));
            }
        }
        let Some((p, x)) = best else {
            return Err(StabilityError::NoStableSample {
                object: object.into(),
                round,
                samples: data.samples.len(),
                center,
            });
        };
        center = x;
        trace.push(InstabilityStep {
            round,
            center,
            p_fail: p,
            stable_samples: data.stable().count(),
        });
    }
    if label(scene, catalog, object, &center, backend)? {
        return Err(StabilityError::Unconfirmed(object.into()));
    }
    let (idx, _) = lookup(scene, catalog, object)?;
    let mut out = scene.clone();
    out.objects[idx] = center.apply(&scene.objects[idx]);
    let final_data = sample_dataset_around(
        scene, catalog, object, &center, spec, backend, seed, iterations,
    )?;
    let final_p_fail = estimate_p_fail(&center, &final_data, spec)?.p_fail;
    let initial_p_fail = match initial {
        Some(p) => p,
        None => final_p_fail,
    };
    Ok(InstabilityResult {
        scene: out,
        center,
        initial_p_fail,
        final_p_fail,
        trace,
    })
}
