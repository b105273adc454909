use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value;

/// Relation names of the placement language. Names outside the known set
/// are kept verbatim so grammar feedback can quote them back.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    LeftOf,
    RightOf,
    FrontOf,
    BackOf,
    AlignCenterLr,
    AlignCenterFb,
    AlignLeft,
    AlignRight,
    AlignFront,
    AlignBack,
    SymmetryAlong,
    FacingTo,
    FacingSameAs,
    FacingOppositeTo,
    FacingFront,
    FacingBack,
    FacingLeft,
    FacingRight,
    RandomRot,
    OrientByRelativeSide,
    /// Named only in the solvedness notes of the prompt; behaves like
    /// ORIENT-BY-RELATIVE-SIDE.
    SideScaleAlign,
    PlaceOnBase,
    PlaceOn,
    Group,
    CopyGroup,
    PlaceIn,
    PlaceAnywhere,
    Unknown(String),
}

const NAMES: [(Relation, &str); 27] = [
    (Relation::LeftOf, "LEFT-OF"),
    (Relation::RightOf, "RIGHT-OF"),
    (Relation::FrontOf, "FRONT-OF"),
    (Relation::BackOf, "BACK-OF"),
    (Relation::AlignCenterLr, "ALIGN-CENTER-LR"),
    (Relation::AlignCenterFb, "ALIGN-CENTER-FB"),
    (Relation::AlignLeft, "ALIGN-LEFT"),
    (Relation::AlignRight, "ALIGN-RIGHT"),
    (Relation::AlignFront, "ALIGN-FRONT"),
    (Relation::AlignBack, "ALIGN-BACK"),
    (Relation::SymmetryAlong, "SYMMETRY-ALONG"),
    (Relation::FacingTo, "FACING-TO"),
    (Relation::FacingSameAs, "FACING-SAME-AS"),
    (Relation::FacingOppositeTo, "FACING-OPPOSITE-TO"),
    (Relation::FacingFront, "FACING-FRONT"),
    (Relation::FacingBack, "FACING-BACK"),
    (Relation::FacingLeft, "FACING-LEFT"),
    (Relation::FacingRight, "FACING-RIGHT"),
    (Relation::RandomRot, "RANDOM-ROT"),
    (Relation::OrientByRelativeSide, "ORIENT-BY-RELATIVE-SIDE"),
    (Relation::SideScaleAlign, "SIDE-SCALE-ALIGN"),
    (Relation::PlaceOnBase, "PLACE-ON-BASE"),
    (Relation::PlaceOn, "PLACE-ON"),
    (Relation::Group, "GROUP"),
    (Relation::CopyGroup, "COPY-GROUP"),
    (Relation::PlaceIn, "PLACE-IN"),
    (Relation::PlaceAnywhere, "PLACE-ANYWHERE"),
];

impl Relation {
    /// The 26 relations of the language (the SIDE-SCALE-ALIGN alias excluded).
    pub fn all() -> Vec<Relation> {
        NAMES
            .iter()
            .map(|(r, _)| r.clone())
            .filter(|r| *r != Relation::SideScaleAlign)
            .collect()
    }

    pub fn from_name(name: &str) -> Relation {
        NAMES
            .iter()
            .find(|(_, n)| *n == name)
            .map(|(r, _)| r.clone())
            .unwrap_or_else(|| Relation::Unknown(name.to_string()))
    }

    pub fn name(&self) -> &str {
        match self {
            Relation::Unknown(s) => s,
            r => NAMES
                .iter()
                .find(|(x, _)| x == r)
                .map(|(_, n)| *n)
                .expect("every known relation is named"),
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, Relation::Unknown(_))
    }

    /// LEFT-OF, RIGHT-OF, FRONT-OF, BACK-OF.
    pub fn is_directional(&self) -> bool {
        matches!(
            self,
            Relation::LeftOf | Relation::RightOf | Relation::FrontOf | Relation::BackOf
        )
    }

    pub fn is_alignment(&self) -> bool {
        matches!(
            self,
            Relation::AlignCenterLr
                | Relation::AlignCenterFb
                | Relation::AlignLeft
                | Relation::AlignRight
                | Relation::AlignFront
                | Relation::AlignBack
        )
    }

    /// Relations that need the subject's x–y position, which physically
    /// placed objects only get after the spatial stage.
    pub fn needs_planar_position(&self) -> bool {
        self.is_directional()
            || self.is_alignment()
            || matches!(
                self,
                Relation::SymmetryAlong
                    | Relation::FacingTo
                    | Relation::OrientByRelativeSide
                    | Relation::SideScaleAlign
                    | Relation::PlaceOnBase
            )
    }

    /// Yaw-only relations that do not read positions.
    pub fn is_pure_rotation(&self) -> bool {
        matches!(
            self,
            Relation::FacingSameAs
                | Relation::FacingOppositeTo
                | Relation::FacingFront
                | Relation::FacingBack
                | Relation::FacingLeft
                | Relation::FacingRight
                | Relation::RandomRot
        )
    }

    pub fn is_rotation(&self) -> bool {
        self.is_pure_rotation()
            || matches!(
                self,
                Relation::FacingTo | Relation::OrientByRelativeSide | Relation::SideScaleAlign
            )
    }

    /// Relations resolved by the physical solver.
    pub fn is_physical(&self) -> bool {
        matches!(
            self,
            Relation::PlaceOn | Relation::PlaceIn | Relation::PlaceAnywhere
        )
    }

    /// Relations that must be the only statement for their subject.
    pub fn is_special(&self) -> bool {
        matches!(self, Relation::PlaceIn | Relation::PlaceAnywhere)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Subject {
    Id(String),
    /// `[[category, count], ...]`, only meaningful with PLACE-IN.
    Batch(Vec<(String, u64)>),
}

impl Subject {
    pub fn id(&self) -> Option<&str> {
        match self {
            Subject::Id(s) => Some(s),
            Subject::Batch(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Id(String),
    /// Member list of a GROUP statement.
    Members(Vec<String>),
}

impl Reference {
    pub fn id(&self) -> Option<&str> {
        match self {
            Reference::Id(s) => Some(s),
            Reference::Members(_) => None,
        }
    }
}

pub type Params = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub subject: Subject,
    pub relation: Relation,
    pub reference: Reference,
    pub params: Params,
}

impl Statement {
    pub fn new(subject: &str, relation: Relation, reference: &str, params: Params) -> Self {
        Self {
            subject: Subject::Id(subject.into()),
            relation,
            reference: Reference::Id(reference.into()),
            params,
        }
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Description { id: String, text: String },
    Statement(Statement),
}

/// An ordered list of retrieval descriptions and statements, exactly as on
/// the wire. Entry indices are the positions in that list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredicateProgram {
    pub entries: Vec<Entry>,
}

pub const ROOT: &str = "root";
pub const GROUP_PREFIX: &str = "group_";

impl PredicateProgram {
    pub fn descriptions(&self) -> impl Iterator<Item = (usize, &str, &str)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e {
                Entry::Description { id, text } => Some((i, id.as_str(), text.as_str())),
                _ => None,
            })
    }

    pub fn statements(&self) -> impl Iterator<Item = (usize, &Statement)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e {
                Entry::Statement(s) => Some((i, s)),
                _ => None,
            })
    }

    /// First description text of every described object, in order of appearance.
    pub fn described_objects(&self) -> Vec<(String, String)> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for (_, id, text) in self.descriptions() {
            if seen.insert(id.to_string()) {
                out.push((id.to_string(), text.to_string()));
            }
        }
        out
    }

    /// Statements whose subject is the given id.
    pub fn statements_for<'a>(
        &'a self,
        id: &'a str,
    ) -> impl Iterator<Item = (usize, &'a Statement)> + 'a {
        self.statements()
            .filter(move |(_, s)| s.subject.id() == Some(id))
    }

    /// The physical relation (PLACE-ON, PLACE-IN, PLACE-ANYWHERE) placing `id`, if any.
    pub fn physical_relation(&self, id: &str) -> Option<&Relation> {
        self.statements()
            .filter(|(_, s)| s.subject.id() == Some(id))
            .map(|(_, s)| &s.relation)
            .find(|r| r.is_physical())
    }
}

pub fn is_group_id(id: &str) -> bool {
    id.starts_with(GROUP_PREFIX)
}

/// Object ids follow `{category}_{identifier}` with non-empty parts.
pub fn is_valid_object_id(id: &str) -> bool {
    let ok_chars = id
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    match id.rsplit_once('_') {
        Some((cat, ident)) => {
            ok_chars
                && !cat.is_empty()
                && !ident.is_empty()
                && !cat.ends_with('_')
                && id != ROOT
                && !is_group_id(id)
        }
        None => false,
    }
}

/// Category of an object id (`pen_holder_0` → `pen_holder`).
pub fn category_of(id: &str) -> &str {
    id.rsplit_once('_').map(|(c, _)| c).unwrap_or(id)
}
