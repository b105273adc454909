//! Local asset library: manifest loading, validation and text retrieval.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_hull_2d, Footprint, Point2, Point3, Vector3};
use crate::shape::{Primitive, Shape, TriMesh};

pub const DEFAULT_RETRIEVAL_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct AssetRecord {
    pub id: String,
    pub description: String,
    pub shape: Shape,
    /// Yaw (radians) that turns the asset's front towards +x.
    pub front_yaw: f64,
    pub supporting_probability: f64,
    pub mass_range: [f64; 2],
    pub friction_range: [f64; 2],
    pub com_shift_range: [[f64; 2]; 3],
    /// Relative mesh path from the manifest, kept for round-tripping.
    pub mesh_path: Option<String>,
}

impl AssetRecord {
    /// A primitive asset with unit-ish physical defaults, mostly for fixtures.
    pub fn primitive(id: &str, primitive: Primitive) -> Self {
        Self {
            id: id.to_string(),
            description: id.replace('_', " "),
            shape: Shape::Primitive(primitive),
            front_yaw: 0.0,
            supporting_probability: 1.0,
            mass_range: [0.5, 0.5],
            friction_range: [0.5, 0.5],
            com_shift_range: [[0.0, 0.0]; 3],
            mesh_path: None,
        }
    }

    pub fn with_description(mut self, d: &str) -> Self {
        self.description = d.to_string();
        self
    }

    pub fn with_supporting_probability(mut self, p: f64) -> Self {
        self.supporting_probability = p;
        self
    }

    pub fn with_mass(mut self, lo: f64, hi: f64) -> Self {
        self.mass_range = [lo, hi];
        self
    }

    pub fn with_friction(mut self, lo: f64, hi: f64) -> Self {
        self.friction_range = [lo, hi];
        self
    }

    pub fn with_com_shift_range(mut self, r: [[f64; 2]; 3]) -> Self {
        self.com_shift_range = r;
        self
    }

    pub fn nominal_mass(&self) -> f64 {
        0.5 * (self.mass_range[0] + self.mass_range[1])
    }

    pub fn nominal_friction(&self) -> f64 {
        0.5 * (self.friction_range[0] + self.friction_range[1])
    }

    pub fn nominal_com_shift(&self) -> Vector3 {
        Vector3::from_fn(|i, _| 0.5 * (self.com_shift_range[i][0] + self.com_shift_range[i][1]))
    }

    /// Footprint at pose yaw `yaw`, centred on the asset origin.
    pub fn footprint(&self, yaw: f64) -> Footprint {
        let local: Vec<Point2> = self.shape.footprint_points();
        convex_hull_2d(&local)
            .expect("validated assets have a non-degenerate footprint")
            .rotated(yaw + self.front_yaw)
    }

    /// Geometric centroid in the local frame.
    pub fn centroid(&self) -> Point3 {
        self.shape.local_centroid()
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let bad = |field: &str| CatalogError::InvalidRange {
            id: self.id.clone(),
            field: field.to_string(),
        };
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ordered(self.mass_range) || self.mass_range[0] <= 0.0 {
            return Err(bad("mass_range"));
        }
        if !ordered(self.friction_range) || self.friction_range[0] < 0.0 {
            return Err(bad("friction_range"));
        }
        if !self.com_shift_range.iter().all(|r| ordered(*r)) {
            return Err(bad("com_shift_range"));
        }
        if !(0.0..=1.0).contains(&self.supporting_probability) {
            return Err(bad("supporting_probability"));
        }
        if !self.front_yaw.is_finite() {
            return Err(bad("front_yaw"));
        }
        let shape_ok = match &self.shape {
            Shape::Primitive(p) => p.is_valid(),
            Shape::Mesh(_) => self.shape.volume() > 0.0,
        };
        if !shape_ok || convex_hull_2d(&self.shape.footprint_points()).is_err() {
            return Err(CatalogError::InvalidShape(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("asset `{0}` references a mesh file that does not exist")]
    MissingMeshFile(String),
    #[error("asset `{id}` has a mesh that fails to load: {message}")]
    MeshLoad { id: String, message: String },
    #[error("asset `{id}` has an invalid `{field}`")]
    InvalidRange { id: String, field: String },
    #[error("asset `{0}` has an invalid shape")]
    InvalidShape(String),
    #[error("duplicate asset id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("empty description")]
    EmptyQuery,
    #[error("no asset is similar enough (best score {best_score:.3})")]
    RetrievalFailure { best_score: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    assets: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    retrieval_threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    description: String,
    #[serde(default)]
    front_yaw: f64,
    supporting_probability: f64,
    mass_range: [f64; 2],
    friction_range: [f64; 2],
    com_shift_range: [[f64; 2]; 3],
    shape: ShapeEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ShapeEntry {
    Primitive(Primitive),
    Mesh(String),
}

/// Immutable set of assets keyed by id.
#[derive(Debug, Clone)]
pub struct Catalog {
    records: BTreeMap<String, AssetRecord>,
    pub manifest_path: PathBuf,
    pub retrieval_threshold: f64,
}

impl Catalog {
    pub fn from_records(
        records: impl IntoIterator<Item = AssetRecord>,
    ) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for r in records {
            r.validate()?;
            if map.contains_key(&r.id) {
                return Err(CatalogError::DuplicateId(r.id));
            }
            map.insert(r.id.clone(), r);
        }
        Ok(Self {
            records: map,
            manifest_path: PathBuf::new(),
            retrieval_threshold: DEFAULT_RETRIEVAL_THRESHOLD,
        })
    }

    pub fn get(&self, id: &str) -> Option<&AssetRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &AssetRecord> {
        self.records.values()
    }

    /// Best match by token cosine; ties go to the smallest id.
    pub fn retrieve(
        &self,
        description: &str,
        threshold: f64,
    ) -> Result<&AssetRecord, RetrievalError> {
        self.retrieve_with(description, threshold, &TokenCosine)
    }

    pub fn retrieve_with(
        &self,
        description: &str,
        threshold: f64,
        sim: &dyn TextSimilarity,
    ) -> Result<&AssetRecord, RetrievalError> {
        if description.trim().is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        let mut best: Option<(&AssetRecord, f64)> = None;
        // BTreeMap iteration is in id order, so a strict `>` keeps the smallest id on ties.
        for r in self.records.values() {
            let s = sim.similarity(description, &r.description);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((r, s));
            }
        }
        match best {
            Some((r, s)) if s >= threshold => Ok(r),
            Some((_, s)) => Err(RetrievalError::RetrievalFailure { best_score: s }),
            None => Err(RetrievalError::RetrievalFailure { best_score: 0.0 }),
        }
    }
}

/// Text similarity used by retrieval. An embedding service can stand in for
/// the built-in token cosine by implementing this trait.
pub trait TextSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine similarity over lowercased alphanumeric token multisets.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenCosine;

impl TextSimilarity for TokenCosine {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        token_cosine(a, b)
    }
}

fn token_bag(s: &str) -> BTreeMap<String, f64> {
    let mut bag = BTreeMap::new();
    for tok in s
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        *bag.entry(tok.to_lowercase()).or_insert(0.0) += 1.0;
    }
    bag
}

pub fn token_cosine(a: &str, b: &str) -> f64 {
    let (ba, bb) = (token_bag(a), token_bag(b));
    let dot: f64 = ba
        .iter()
        .filter_map(|(t, x)| bb.get(t).map(|y| x * y))
        .sum();
    let na: f64 = ba.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = bb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn load_catalog(manifest_path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let path = manifest_path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cat = catalog_from_manifest(&text, path.parent().unwrap_or(Path::new(".")))?;
    cat.manifest_path = path.to_path_buf();
    Ok(cat)
}

/// Primitive tabletop assets bundled with the library.
pub fn builtin_catalog() -> Catalog {
    catalog_from_manifest(
        include_str!("../resources/default_catalog.json"),
        Path::new("."),
    )
    .expect("the bundled manifest is valid")
}

/// Parses manifest JSON; mesh paths resolve against `base`.
pub fn catalog_from_manifest(text: &str, base: &Path) -> Result<Catalog, CatalogError> {
    let manifest: Manifest = serde_json::from_str(text)?;
    let mut records = Vec::with_capacity(manifest.assets.len());
    for e in manifest.assets {
        let (shape, mesh_path) = match e.shape {
            ShapeEntry::Primitive(p) => (Shape::Primitive(p), None),
            ShapeEntry::Mesh(rel) => {
                let file = base.join(&rel);
                if !file.is_file() {
                    return Err(CatalogError::MissingMeshFile(e.id));
                }
                let text = std::fs::read_to_string(&file).map_err(|source| CatalogError::Io {
                    path: file.clone(),
                    source,
                })?;
                let mesh = TriMesh::parse_obj(&text).map_err(|err| CatalogError::MeshLoad {
                    id: e.id.clone(),
                    message: err.to_string(),
                })?;
                (Shape::Mesh(Arc::new(mesh)), Some(rel))
            }
        };
        records.push(AssetRecord {
            id: e.id,
            description: e.description,
            shape,
            front_yaw: e.front_yaw,
            supporting_probability: e.supporting_probability,
            mass_range: e.mass_range,
            friction_range: e.friction_range,
            com_shift_range: e.com_shift_range,
            mesh_path,
        });
    }
    let mut cat = Catalog::from_records(records)?;
    if let Some(t) = manifest.retrieval_threshold {
        cat.retrieval_threshold = t;
    }
    Ok(cat)
}

/// Serializes a catalog of primitive or mesh assets back to manifest JSON.
pub fn manifest_json(catalog: &Catalog) -> serde_json::Value {
    let assets: Vec<ManifestEntry> = catalog
        .records()
        .map(|r| ManifestEntry {
            id: r.id.clone(),
            description: r.description.clone(),
            front_yaw: r.front_yaw,
            supporting_probability: r.supporting_probability,
            mass_range: r.mass_range,
            friction_range: r.friction_range,
            com_shift_range: r.com_shift_range,
            shape: match (&r.shape, &r.mesh_path) {
                (Shape::Primitive(p), _) => ShapeEntry::Primitive(p.clone()),
                (Shape::Mesh(_), Some(rel)) => ShapeEntry::Mesh(rel.clone()),
                (Shape::Mesh(_), None) => ShapeEntry::Mesh(format!("{}.obj", r.id)),
            },
        })
        .collect();
    serde_json::to_value(Manifest {
        assets,
        retrieval_threshold: Some(catalog.retrieval_threshold),
    })
    .expect("manifest serializes")
}
