use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{is_group_id, PredicateProgram, Reference, Relation, Subject};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolvedFlags {
    pub x: bool,
    pub y: bool,
    pub height: bool,
    pub yaw: bool,
}

impl SolvedFlags {
    pub const ALL: SolvedFlags = SolvedFlags {
        x: true,
        y: true,
        height: true,
        yaw: true,
    };

    pub fn fully_solved(&self) -> bool {
        self.x && self.y && self.height && self.yaw
    }

    fn or(self, o: SolvedFlags) -> SolvedFlags {
        SolvedFlags {
            x: self.x || o.x,
            y: self.y || o.y,
            height: self.height || o.height,
            yaw: self.yaw || o.yaw,
        }
    }

    fn and(self, o: SolvedFlags) -> SolvedFlags {
        SolvedFlags {
            x: self.x && o.x,
            y: self.y && o.y,
            height: self.height && o.height,
            yaw: self.yaw && o.yaw,
        }
    }

    /// Names of the undetermined quantities.
    pub fn missing(&self) -> Vec<&'static str> {
        let mut m = Vec::new();
        if !self.x {
            m.push("x");
        }
        if !self.y {
            m.push("y");
        }
        if !self.height {
            m.push("height");
        }
        if !self.yaw {
            m.push("yaw");
        }
        m
    }
}

/// Flags a single statement sets on its subject.
pub fn flags_of(relation: &Relation, has_x: bool, has_y: bool) -> SolvedFlags {
    use Relation::*;
    match relation {
        FrontOf | BackOf | AlignCenterFb | AlignFront | AlignBack => SolvedFlags {
            x: true,
            ..Default::default()
        },
        LeftOf | RightOf | AlignCenterLr | AlignLeft | AlignRight => SolvedFlags {
            y: true,
            ..Default::default()
        },
        SymmetryAlong => SolvedFlags {
            x: true,
            y: true,
            ..Default::default()
        },
        PlaceOnBase => SolvedFlags {
            x: has_x,
            y: has_y,
            height: true,
            yaw: false,
        },
        PlaceOn => SolvedFlags {
            x: true,
            y: true,
            height: true,
            yaw: false,
        },
        FacingTo | FacingSameAs | FacingOppositeTo | FacingFront | FacingBack | FacingLeft
        | FacingRight | RandomRot | OrientByRelativeSide | SideScaleAlign => SolvedFlags {
            yaw: true,
            ..Default::default()
        },
        PlaceIn | PlaceAnywhere => SolvedFlags::ALL,
        Group | CopyGroup | Unknown(_) => SolvedFlags::default(),
    }
}

/// Per-object determination flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolvednessStatus {
    pub objects: BTreeMap<String, SolvedFlags>,
}

impl SolvednessStatus {
    pub fn fully_solved(&self, id: &str) -> bool {
        self.objects.get(id).is_some_and(SolvedFlags::fully_solved)
    }
}

/// Applies the determination table in program order. Copied group members
/// take the flags of their group; a copied group inherits height and yaw
/// from its source and needs its own statements for x and y.
pub fn analyze_solvedness(program: &PredicateProgram) -> SolvednessStatus {
    let mut objects: BTreeMap<String, SolvedFlags> = BTreeMap::new();
    for (_, id, _) in program.descriptions() {
        objects.entry(id.to_string()).or_default();
    }
    let mut groups: BTreeMap<String, (Vec<String>, SolvedFlags)> = BTreeMap::new();
    for (_, s) in program.statements() {
        let Subject::Id(subject) = &s.subject else {
            continue;
        };
        match (&s.relation, &s.reference) {
            (Relation::Group, Reference::Members(members)) if !groups.contains_key(subject) => {
                let f = members.iter().fold(SolvedFlags::ALL, |acc, m| {
                    acc.and(objects.get(m).copied().unwrap_or_default())
                });
                groups.insert(subject.clone(), (members.clone(), f));
            }
            (Relation::CopyGroup, Reference::Id(src)) if !groups.contains_key(subject) => {
                if let Some((members, f)) = groups.get(src).cloned() {
                    let inherited = SolvedFlags {
                        height: f.height,
                        yaw: f.yaw,
                        ..Default::default()
                    };
                    let clones = members.iter().map(|m| format!("{m}-{subject}")).collect();
                    groups.insert(subject.clone(), (clones, inherited));
                }
            }
            _ => {
                let add = flags_of(
                    &s.relation,
                    s.params.contains_key("x"),
                    s.params.contains_key("y"),
                );
                if is_group_id(subject) {
                    if let Some((_, f)) = groups.get_mut(subject) {
                        *f = f.or(add);
                    }
                } else {
                    let e = objects.entry(subject.clone()).or_default();
                    *e = e.or(add);
                }
            }
        }
    }
    // Members of copied groups inherit the final flags of their group.
    for (g, (members, f)) in &groups {
        for m in members {
            if m.ends_with(&format!("-{g}")) {
                objects.insert(m.clone(), *f);
            }
        }
    }
    SolvednessStatus { objects }
}

/// Objects that the solvers cannot place as specified. Objects placed by
/// PLACE-ON need no yaw statement (a seeded yaw is drawn instead).
pub fn unsolved_objects(
    program: &PredicateProgram,
    status: &SolvednessStatus,
) -> Vec<(String, SolvedFlags)> {
    status
        .objects
        .iter()
        .filter(|(id, f)| match program.physical_relation(id) {
            Some(Relation::PlaceOn) => !(f.x && f.y && f.height),
            _ => !f.fully_solved(),
        })
        .map(|(id, f)| (id.clone(), *f))
        .collect()
}
