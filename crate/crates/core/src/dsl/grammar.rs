use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ast::{
    is_group_id, is_valid_object_id, PredicateProgram, Reference, Relation, Statement, Subject,
    ROOT,
};
use crate::catalog::{Catalog, RetrievalError};

/// A grammar problem tied to the entry (index in the program array) that
/// caused it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrammarIssue {
    UnknownRelation {
        entry: usize,
        relation: String,
    },
    ForwardReference {
        entry: usize,
        subject: String,
        reference: String,
    },
    MissingDescription {
        entry: usize,
        object: String,
    },
    DuplicateDescription {
        entry: usize,
        object: String,
    },
    RetrievalFailed {
        entry: usize,
        object: String,
        best_score: f64,
    },
    MissingParam {
        entry: usize,
        relation: String,
        key: String,
    },
    UnexpectedParam {
        entry: usize,
        relation: String,
        key: String,
    },
    InvalidParamValue {
        entry: usize,
        key: String,
        reason: String,
    },
    PlaceOnRoot {
        entry: usize,
        object: String,
    },
    InvalidReference {
        entry: usize,
        subject: String,
        reason: String,
    },
    CoupledSpecial {
        entry: usize,
        object: String,
        special: String,
    },
    ConflictingPlacement {
        entry: usize,
        object: String,
    },
    OrderViolation {
        entry: usize,
        subject: String,
        reason: String,
    },
    DuplicateGroup {
        entry: usize,
        group: String,
    },
    CopyOfUndefinedGroup {
        entry: usize,
        group: String,
        source: String,
    },
    UndefinedGroup {
        entry: usize,
        group: String,
    },
    InvalidName {
        entry: usize,
        name: String,
    },
    InvalidGroupName {
        entry: usize,
        name: String,
    },
    UnsupportedForGroup {
        entry: usize,
        group: String,
        relation: String,
    },
    SpatialOnPhysical {
        entry: usize,
        object: String,
        relation: String,
        other: String,
    },
    GroupMemberNotSpatial {
        entry: usize,
        group: String,
        member: String,
    },
    BatchSubjectMisuse {
        entry: usize,
        relation: String,
    },
}

impl GrammarIssue {
    pub fn entry(&self) -> usize {
        use GrammarIssue::*;
        match self {
            UnknownRelation { entry, .. }
            | ForwardReference { entry, .. }
            | MissingDescription { entry, .. }
            | DuplicateDescription { entry, .. }
            | RetrievalFailed { entry, .. }
            | MissingParam { entry, .. }
            | UnexpectedParam { entry, .. }
            | InvalidParamValue { entry, .. }
            | PlaceOnRoot { entry, .. }
            | InvalidReference { entry, .. }
            | CoupledSpecial { entry, .. }
            | ConflictingPlacement { entry, .. }
            | OrderViolation { entry, .. }
            | DuplicateGroup { entry, .. }
            | CopyOfUndefinedGroup { entry, .. }
            | UndefinedGroup { entry, .. }
            | InvalidName { entry, .. }
            | InvalidGroupName { entry, .. }
            | UnsupportedForGroup { entry, .. }
            | SpatialOnPhysical { entry, .. }
            | GroupMemberNotSpatial { entry, .. }
            | BatchSubjectMisuse { entry, .. } => *entry,
        }
    }
}

/// (allowed keys, required keys) per relation.
fn param_spec(r: &Relation) -> (&'static [&'static str], &'static [&'static str]) {
    match r {
        _ if r.is_directional() => (&["distance"], &[]),
        Relation::SymmetryAlong => (&["C"], &["C"]),
        Relation::PlaceOnBase => (&["x", "y"], &[]),
        Relation::PlaceOn => (&["x_offset", "y_offset", "overlap", "stability"], &[]),
        Relation::Group => (&["anchor"], &["anchor"]),
        _ => (&[], &[]),
    }
}

fn check_value(entry: usize, key: &str, v: &Value, out: &mut Vec<GrammarIssue>) {
    let bad = |reason: &str| GrammarIssue::InvalidParamValue {
        entry,
        key: key.to_string(),
        reason: reason.to_string(),
    };
    match key {
        "distance" | "x" | "y" | "x_offset" | "y_offset" => {
            if !v.as_f64().is_some_and(f64::is_finite) {
                out.push(bad("expected a number"));
            }
        }
        "overlap" => match v.as_f64() {
            Some(t) if (0.0..=1.0).contains(&t) => {}
            _ => out.push(bad("expected a number in [0, 1]")),
        },
        "stability" => match v.as_str() {
            Some("stable" | "unstable") => {}
            _ => out.push(bad("expected \"stable\" or \"unstable\"")),
        },
        "C" | "anchor" => {
            if !v.is_string() {
                out.push(bad("expected an object id"));
            }
        }
        _ => {}
    }
}

fn subject_name(s: &Statement) -> String {
    match &s.subject {
        Subject::Id(id) => id.clone(),
        Subject::Batch(items) => items
            .iter()
            .map(|(c, n)| format!("{n} {c}"))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

/// Checks a parsed program against the language rules. An empty result means
/// the program is grammatically valid. Descriptions are also checked for
/// retrievability against `catalog` at its configured threshold.
pub fn validate_grammar(program: &PredicateProgram, catalog: &Catalog) -> Vec<GrammarIssue> {
    let mut out = Vec::new();

    // Placement relation per object over the whole program.
    let mut placement: BTreeMap<&str, Vec<(usize, &Relation)>> = BTreeMap::new();
    let mut stmt_count: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in program.statements() {
        if let Some(id) = s.subject.id() {
            *stmt_count.entry(id).or_default() += 1;
            if s.relation.is_physical() || s.relation == Relation::PlaceOnBase {
                placement.entry(id).or_default().push((i, &s.relation));
            }
        }
    }
    let physical = |id: &str| {
        placement
            .get(id)
            .is_some_and(|v| v.iter().any(|(_, r)| r.is_physical()))
    };
    let special_of = |id: &str| {
        placement.get(id).and_then(|v| {
            v.iter()
                .find(|(_, r)| r.is_special())
                .map(|(i, r)| (*i, *r))
        })
    };

    let mut described: BTreeMap<&str, usize> = BTreeMap::new();
    let mut introduced: BTreeSet<String> = BTreeSet::new();
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    // 0: plain spatial, 1: after the first PLACE-ON/PLACE-IN, 2: after the first PLACE-ANYWHERE
    let mut phase = 0u8;

    for (i, e) in program.entries.iter().enumerate() {
        let s = match e {
            super::ast::Entry::Description { id, text } => {
                if !is_valid_object_id(id) {
                    out.push(GrammarIssue::InvalidName {
                        entry: i,
                        name: id.clone(),
                    });
                }
                if described.insert(id, i).is_some() {
                    out.push(GrammarIssue::DuplicateDescription {
                        entry: i,
                        object: id.clone(),
                    });
                }
                introduced.insert(id.clone());
                match catalog.retrieve(text, catalog.retrieval_threshold) {
                    Ok(_) => {}
                    Err(RetrievalError::RetrievalFailure { best_score }) => {
                        out.push(GrammarIssue::RetrievalFailed {
                            entry: i,
                            object: id.clone(),
                            best_score,
                        })
                    }
                    Err(RetrievalError::EmptyQuery) => out.push(GrammarIssue::RetrievalFailed {
                        entry: i,
                        object: id.clone(),
                        best_score: 0.0,
                    }),
                }
                continue;
            }
            super::ast::Entry::Statement(s) => s,
        };
        let rel = &s.relation;
        if !rel.is_known() {
            out.push(GrammarIssue::UnknownRelation {
                entry: i,
                relation: rel.name().to_string(),
            });
            continue;
        }
        let subj = subject_name(s);

        // Parameters.
        let (allowed, required) = param_spec(rel);
        for key in required {
            if !s.params.contains_key(*key) {
                out.push(GrammarIssue::MissingParam {
                    entry: i,
                    relation: rel.name().into(),
                    key: key.to_string(),
                });
            }
        }
        for (key, v) in &s.params {
            if allowed.contains(&key.as_str()) {
                check_value(i, key, v, &mut out);
            } else {
                out.push(GrammarIssue::UnexpectedParam {
                    entry: i,
                    relation: rel.name().into(),
                    key: key.clone(),
                });
            }
        }

        // Ordering.
        let subject_physical = match &s.subject {
            Subject::Batch(_) => true,
            Subject::Id(id) => physical(id),
        };
        if phase == 2 && *rel != Relation::PlaceAnywhere {
            out.push(GrammarIssue::OrderViolation {
                entry: i,
                subject: subj.clone(),
                reason: "only PLACE-ANYWHERE statements may follow the first PLACE-ANYWHERE".into(),
            });
        } else if phase == 1 && !subject_physical {
            out.push(GrammarIssue::OrderViolation {
                entry: i,
                subject: subj.clone(),
                reason: "statements for objects not placed by PLACE-ON must come before the first PLACE-ON".into(),
            });
        }
        match rel {
            Relation::PlaceOn | Relation::PlaceIn => phase = phase.max(1),
            Relation::PlaceAnywhere => phase = 2,
            _ => {}
        }

        // Subject.
        match &s.subject {
            Subject::Batch(items) => {
                if *rel != Relation::PlaceIn {
                    out.push(GrammarIssue::BatchSubjectMisuse {
                        entry: i,
                        relation: rel.name().into(),
                    });
                }
                for (cat, n) in items {
                    if *n == 0 || cat.is_empty() {
                        out.push(GrammarIssue::InvalidParamValue {
                            entry: i,
                            key: cat.clone(),
                            reason: "batch items need a category and a positive count".into(),
                        });
                    }
                }
            }
            Subject::Id(id) if matches!(rel, Relation::Group | Relation::CopyGroup) => {
                if !is_group_id(id) {
                    out.push(GrammarIssue::InvalidGroupName {
                        entry: i,
                        name: id.clone(),
                    });
                }
                if groups.contains_key(id) || described.contains_key(id.as_str()) {
                    out.push(GrammarIssue::DuplicateGroup {
                        entry: i,
                        group: id.clone(),
                    });
                }
            }
            Subject::Id(id) if is_group_id(id) => {
                if !groups.contains_key(id) {
                    out.push(GrammarIssue::UndefinedGroup {
                        entry: i,
                        group: id.clone(),
                    });
                }
                if rel.is_physical() || *rel == Relation::PlaceOnBase {
                    out.push(GrammarIssue::UnsupportedForGroup {
                        entry: i,
                        group: id.clone(),
                        relation: rel.name().into(),
                    });
                }
            }
            Subject::Id(id) => {
                if !described.contains_key(id.as_str()) && !introduced.contains(id) {
                    out.push(GrammarIssue::MissingDescription {
                        entry: i,
                        object: id.clone(),
                    });
                }
                if let Some((first, special)) = special_of(id) {
                    if first != i {
                        out.push(GrammarIssue::CoupledSpecial {
                            entry: i,
                            object: id.clone(),
                            special: special.name().into(),
                        });
                    }
                }
                if let Some(p) = placement.get(id.as_str()) {
                    if (rel.is_physical() || *rel == Relation::PlaceOnBase)
                        && p.len() > 1
                        && p[0].0 != i
                    {
                        out.push(GrammarIssue::ConflictingPlacement {
                            entry: i,
                            object: id.clone(),
                        });
                    }
                }
                if physical(id) && rel.needs_planar_position() {
                    out.push(GrammarIssue::SpatialOnPhysical {
                        entry: i,
                        object: id.clone(),
                        relation: rel.name().into(),
                        other: id.clone(),
                    });
                }
            }
        }

        // Reference.
        match (&s.reference, rel) {
            (Reference::Members(members), Relation::Group) => {
                for m in members {
                    if !introduced.contains(m) || is_group_id(m) {
                        out.push(GrammarIssue::ForwardReference {
                            entry: i,
                            subject: subj.clone(),
                            reference: m.clone(),
                        });
                    } else if physical(m) {
                        out.push(GrammarIssue::GroupMemberNotSpatial {
                            entry: i,
                            group: subj.clone(),
                            member: m.clone(),
                        });
                    }
                }
                if let Some(a) = s.string("anchor") {
                    if !members.iter().any(|m| m == a) {
                        out.push(GrammarIssue::InvalidParamValue {
                            entry: i,
                            key: "anchor".into(),
                            reason: format!("`{a}` is not a member of the group"),
                        });
                    }
                }
                if let Subject::Id(g) = &s.subject {
                    if !groups.contains_key(g) {
                        groups.insert(g.clone(), members.clone());
                        introduced.insert(g.clone());
                    }
                }
            }
            (Reference::Members(_), _) => out.push(GrammarIssue::InvalidReference {
                entry: i,
                subject: subj.clone(),
                reason: "a member list is only valid for GROUP".into(),
            }),
            (Reference::Id(_), Relation::Group) => out.push(GrammarIssue::InvalidReference {
                entry: i,
                subject: subj.clone(),
                reason: "GROUP needs a list of member ids".into(),
            }),
            (Reference::Id(src), Relation::CopyGroup) => match groups.get(src).cloned() {
                Some(members) => {
                    if let Subject::Id(g) = &s.subject {
                        if !groups.contains_key(g) {
                            let clones: Vec<String> =
                                members.iter().map(|m| format!("{m}-{g}")).collect();
                            introduced.extend(clones.iter().cloned());
                            introduced.insert(g.clone());
                            groups.insert(g.clone(), clones);
                        }
                    }
                }
                None => out.push(GrammarIssue::CopyOfUndefinedGroup {
                    entry: i,
                    group: subj.clone(),
                    source: src.clone(),
                }),
            },
            (Reference::Id(r), _) => {
                if r == ROOT {
                    match rel {
                        Relation::PlaceOn => out.push(GrammarIssue::PlaceOnRoot {
                            entry: i,
                            object: subj.clone(),
                        }),
                        Relation::PlaceIn => out.push(GrammarIssue::InvalidReference {
                            entry: i,
                            subject: subj.clone(),
                            reason: "PLACE-IN needs a container object, not root".into(),
                        }),
                        _ => {}
                    }
                } else if !introduced.contains(r) {
                    out.push(GrammarIssue::ForwardReference {
                        entry: i,
                        subject: subj.clone(),
                        reference: r.clone(),
                    });
                } else if matches!(rel, Relation::PlaceOn | Relation::PlaceIn) && is_group_id(r) {
                    out.push(GrammarIssue::InvalidReference {
                        entry: i,
                        subject: subj.clone(),
                        reason: format!("{} needs an object, not the group `{r}`", rel.name()),
                    });
                } else if !subject_physical && physical(r) {
                    out.push(GrammarIssue::SpatialOnPhysical {
                        entry: i,
                        object: subj.clone(),
                        relation: rel.name().into(),
                        other: r.clone(),
                    });
                }
            }
        }
        if *rel == Relation::SymmetryAlong {
            if let Some(c) = s.string("C") {
                if c != ROOT && !introduced.contains(c) {
                    out.push(GrammarIssue::ForwardReference {
                        entry: i,
                        subject: subj.clone(),
                        reference: c.to_string(),
                    });
                } else if !subject_physical && physical(c) {
                    out.push(GrammarIssue::SpatialOnPhysical {
                        entry: i,
                        object: subj.clone(),
                        relation: rel.name().into(),
                        other: c.to_string(),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AssetRecord;
    use crate::dsl::parse_program;
    use crate::shape::Primitive;

    fn catalog() -> Catalog {
        let b = |id: &str, d: &str| {
            AssetRecord::primitive(
                id,
                Primitive::Box {
                    size: [0.1, 0.1, 0.05],
                },
            )
            .with_description(d)
        };
        Catalog::from_records([
            b("laptop_a", "a slim silver laptop with a minimalist design"),
            b("notebook_a", "a medium-sized notebook with lined pages"),
            b("cup_a", "an empty ceramic cup with a handle"),
        ])
        .unwrap()
    }

    fn issues(text: &str) -> Vec<GrammarIssue> {
        validate_grammar(&parse_program(text).unwrap(), &catalog())
    }

    #[test]
    fn place_on_root_is_flagged() {
        let v = issues(r#"[["cup_0","an empty ceramic cup"],["cup_0","PLACE-ON","root",{}]]"#);
        assert_eq!(
            v,
            vec![GrammarIssue::PlaceOnRoot {
                entry: 1,
                object: "cup_0".into()
            }]
        );
    }

    #[test]
    fn forward_reference_is_flagged() {
        let v = issues(r#"[["cup_0","an empty ceramic cup"],["cup_0","LEFT-OF","bottle_9",{}]]"#);
        assert!(v.contains(&GrammarIssue::ForwardReference {
            entry: 1,
            subject: "cup_0".into(),
            reference: "bottle_9".into()
        }));
    }

    #[test]
    fn special_predicates_stand_alone() {
        let v = issues(
            r#"[["cup_0","an empty ceramic cup"],["cup_0","PLACE-ANYWHERE","root",{}],["cup_0","FACING-FRONT","root",{}]]"#,
        );
        assert!(v
            .iter()
            .any(|i| matches!(i, GrammarIssue::CoupledSpecial { entry: 2, .. })));
    }

    #[test]
    fn spatial_after_place_on_is_out_of_order() {
        let v = issues(
            r#"[["notebook_0","a notebook"],["notebook_0","PLACE-ON-BASE","root",{"x":0,"y":0}],["notebook_0","FACING-FRONT","root",{}],
                ["cup_0","a ceramic cup"],["cup_0","PLACE-ON","notebook_0",{}],
                ["notebook_1","a notebook"],["notebook_1","PLACE-ON-BASE","root",{"x":0.3,"y":0}],["notebook_1","FACING-FRONT","root",{}]]"#,
        );
        assert!(v
            .iter()
            .any(|i| matches!(i, GrammarIssue::OrderViolation { entry: 6, .. })));
    }

    #[test]
    fn params_are_checked() {
        let v = issues(
            r#"[["cup_0","a cup"],["notebook_0","a notebook"],["notebook_0","PLACE-ON-BASE","root",{"x":0,"y":0,"z":1}],["notebook_0","RANDOM-ROT","root",{}],
                ["cup_0","PLACE-ON","notebook_0",{"overlap":1.5,"stability":"wobbly"}]]"#,
        );
        assert!(v
            .iter()
            .any(|i| matches!(i, GrammarIssue::UnexpectedParam { key, .. } if key == "z")));
        assert!(v
            .iter()
            .any(|i| matches!(i, GrammarIssue::InvalidParamValue { key, .. } if key == "overlap")));
        assert!(v.iter().any(
            |i| matches!(i, GrammarIssue::InvalidParamValue { key, .. } if key == "stability")
        ));
    }

    #[test]
    fn groups_and_copies() {
        let v = issues(
            r#"[["cup_0","a cup"],["cup_0","PLACE-ON-BASE","root",{"x":0,"y":0}],["cup_0","FACING-FRONT","root",{}],
                ["group_a","GROUP",["cup_0"],{"anchor":"cup_0"}],
                ["group_b","COPY-GROUP","group_a",{}],["group_b","BACK-OF","group_a",{"distance":0.1}],["group_b","ALIGN-CENTER-LR","group_a",{}],
                ["group_c","COPY-GROUP","group_z",{}],["group_a","GROUP",["cup_0"],{"anchor":"cup_0"}],["tray","GROUP",["cup_0"],{"anchor":"cup_0"}]]"#,
        );
        assert_eq!(
            v,
            vec![
                GrammarIssue::CopyOfUndefinedGroup {
                    entry: 7,
                    group: "group_c".into(),
                    source: "group_z".into()
                },
                GrammarIssue::DuplicateGroup {
                    entry: 8,
                    group: "group_a".into()
                },
                GrammarIssue::InvalidGroupName {
                    entry: 9,
                    name: "tray".into()
                },
            ]
        );
    }

    #[test]
    fn unknown_relation_is_an_issue() {
        let v = issues(r#"[["cup_0","a cup"],["cup_0","HOVER","root",{}]]"#);
        assert_eq!(
            v,
            vec![GrammarIssue::UnknownRelation {
                entry: 1,
                relation: "HOVER".into()
            }]
        );
    }

    #[test]
    fn unretrievable_description_is_flagged() {
        let v =
            issues(r#"[["xylophone_0","xylophone"],["xylophone_0","PLACE-ANYWHERE","root",{}]]"#);
        assert!(matches!(
            v.as_slice(),
            [GrammarIssue::RetrievalFailed { entry: 0, .. }]
        ));
    }
}
