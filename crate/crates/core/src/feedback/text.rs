use std::fmt::Write;

use super::{Channel, EmptyRegion, FeedbackReport, Issue, ReportMetrics, VqaOutcome};
use crate::dsl::GrammarIssue;

fn list(ids: &[String]) -> String {
    ids.iter()
        .map(|s| format!("`{s}`"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One sentence describing a grammar issue.
pub fn grammar_sentence(issue: &GrammarIssue) -> String {
    use GrammarIssue::*;
    match issue {
        UnknownRelation { entry, relation } => {
            format!("Entry {entry}: `{relation}` is not a known relation.")
        }
        ForwardReference {
            entry,
            subject,
            reference,
        } => {
            format!("Entry {entry}: `{subject}` refers to `{reference}`, which is not placed by an earlier statement.")
        }
        MissingDescription { entry, object } => {
            format!("Entry {entry}: `{object}` is used without a description entry.")
        }
        DuplicateDescription { entry, object } => {
            format!("Entry {entry}: `{object}` is described more than once.")
        }
        RetrievalFailed {
            entry,
            object,
            best_score,
        } => {
            format!("Entry {entry}: no asset matches the description of `{object}` (best match score {best_score:.2}).")
        }
        MissingParam {
            entry,
            relation,
            key,
        } => format!("Entry {entry}: `{relation}` requires the parameter `{key}`."),
        UnexpectedParam {
            entry,
            relation,
            key,
        } => format!("Entry {entry}: `{relation}` does not take the parameter `{key}`."),
        InvalidParamValue { entry, key, reason } => {
            format!("Entry {entry}: parameter `{key}` is invalid, {reason}.")
        }
        PlaceOnRoot { entry, object } => {
            format!("Entry {entry}: `{object}` cannot be placed on `root`; use place_on_base or place_anywhere instead.")
        }
        InvalidReference {
            entry,
            subject,
            reason,
        } => format!("Entry {entry}: invalid reference for `{subject}`, {reason}."),
        CoupledSpecial {
            entry,
            object,
            special,
        } => {
            format!("Entry {entry}: `{object}` is placed with `{special}`, which cannot be combined with other relations.")
        }
        ConflictingPlacement { entry, object } => {
            format!("Entry {entry}: `{object}` is given more than one placement.")
        }
        OrderViolation {
            entry,
            subject,
            reason,
        } => format!("Entry {entry}: statement for `{subject}` is out of order, {reason}."),
        DuplicateGroup { entry, group } => {
            format!("Entry {entry}: group `{group}` is defined more than once.")
        }
        CopyOfUndefinedGroup {
            entry,
            group,
            source,
        } => {
            format!("Entry {entry}: `{group}` copies `{source}`, which is not a defined group.")
        }
        UndefinedGroup { entry, group } => {
            format!("Entry {entry}: group `{group}` is used before it is defined.")
        }
        InvalidName { entry, name } => {
            format!("Entry {entry}: `{name}` is not a valid object id (expected `category_N`).")
        }
        InvalidGroupName { entry, name } => {
            format!("Entry {entry}: `{name}` is not a valid group name (expected `group_N`).")
        }
        UnsupportedForGroup {
            entry,
            group,
            relation,
        } => format!("Entry {entry}: `{relation}` cannot be applied to group `{group}`."),
        SpatialOnPhysical {
            entry,
            object,
            relation,
            other,
        } => {
            format!("Entry {entry}: `{object}` is placed physically and cannot also take `{relation}` relative to `{other}`.")
        }
        GroupMemberNotSpatial {
            entry,
            group,
            member,
        } => {
            format!("Entry {entry}: `{member}` in group `{group}` must be placed only with spatial relations.")
        }
        BatchSubjectMisuse { entry, relation } => format!(
            "Entry {entry}: a batch of objects can only be used with place_in, not `{relation}`."
        ),
    }
}

/// One sentence describing an issue.
pub fn issue_sentence(issue: &Issue) -> String {
    match issue {
        Issue::Syntax { message, entry, line, column } => match (entry, line, column) {
            (Some(e), _, _) => format!("Entry {e} could not be parsed: {message}."),
            (None, Some(l), Some(c)) => format!("The program is not valid JSON at line {l}, column {c}: {message}."),
            _ => format!("The program could not be parsed: {message}."),
        },
        Issue::Grammar { issue } => grammar_sentence(issue),
        Issue::Unsolved { object, missing } => {
            format!("`{object}` is not fully determined; add relations that fix its {}.", missing.join(", "))
        }
        Issue::Penetration { a, b, area } => format!("`{a}` and `{b}` overlap by {area:.4} m²."),
        Issue::OutOfBounds { object, distance } => format!("`{object}` extends {distance:.3} m beyond the table edge."),
        Issue::NoSupportedPlacement { object, target, feasible_offsets } => format!(
            "`{object}` cannot be supported by `{target}`: none of the {feasible_offsets} collision-free positions rest on it; try a larger target or reduce the overlap."
        ),
        Issue::StackInfeasible { object, target, tried, candidates } => format!(
            "`{object}` does not stay put on `{target}`: all {tried} simulated placements out of {candidates} candidates moved or fell."
        ),
        Issue::TargetNotSupporting { object } => format!("`{object}` cannot support other objects; choose another target."),
        Issue::UnknownTarget { object } => format!("`{object}` is used as a target but was not placed."),
        Issue::RetrievalFailed { object } => format!("No asset could be found for `{object}`."),
        Issue::NoCavity { container } => format!("`{container}` has no opening that objects can be placed into."),
        Issue::ContainerOverflow { container, placed, failed } => {
            let placed = if placed.is_empty() { "nothing".to_string() } else { list(placed) };
            format!("`{container}` is full: {placed} fit, but {} could not be placed.", list(failed))
        }
        Issue::Fell { object } => format!("`{object}` fell over when the scene was settled."),
        Issue::Internal { object: Some(o), message } => format!("Placing `{o}` failed: {message}."),
        Issue::Internal { object: None, message } => format!("The scene could not be built: {message}."),
    }
}

fn region_sentence(r: &EmptyRegion) -> String {
    let (w, d) = (r.max.y - r.min.y, r.max.x - r.min.x);
    let c = r.center();
    let place = match (&r.nearest, r.direction) {
        (Some(id), Some(dir)) => format!(" {} `{id}`", dir.phrase()),
        _ => String::new(),
    };
    format!(
        "There is an empty region{place} of {:.3} m² ({w:.2} m wide, {d:.2} m deep) centred at x={:.2}, y={:.2}.",
        r.area, c.x, c.y
    )
}

fn metrics_lines(m: &ReportMetrics, out: &mut String) {
    if let Some(s) = m.stability_score {
        writeln!(out, "- Stability: {s:.3}").unwrap();
    }
    match &m.external_vqa {
        Some(VqaOutcome::Score { value }) => writeln!(out, "- Visual match: {value:.3}").unwrap(),
        Some(VqaOutcome::Unavailable { reason }) => {
            writeln!(out, "- Visual match: unavailable ({reason})").unwrap()
        }
        None if m.stability_score.is_some() => {
            writeln!(out, "- Visual match: not evaluated").unwrap()
        }
        None => {}
    }
    writeln!(out, "- Objects: {}", m.object_count).unwrap();
    writeln!(
        out,
        "- Surface coverage: {:.1}%",
        100.0 * m.surface_coverage
    )
    .unwrap();
    writeln!(out, "- Compactness: {:.3}", m.compactness).unwrap();
}

/// Prose sent back to the agent. Deterministic in the report contents.
pub fn render_text(report: &FeedbackReport) -> String {
    let mut out = String::new();
    let heading = match report.channel {
        Channel::Grammar if report.issues.is_empty() => "The program is valid.",
        Channel::Grammar => {
            "The program has errors. Fix them and return the complete corrected program."
        }
        Channel::Failure => {
            "The scene could not be built. Revise the program to address these problems."
        }
        Channel::Success => "The scene was built successfully.",
    };
    writeln!(out, "{heading}").unwrap();
    if !report.issues.is_empty() {
        writeln!(out, "\nProblems:").unwrap();
        for i in &report.issues {
            writeln!(out, "- {}", issue_sentence(i)).unwrap();
        }
    }
    if !report.empty_regions.is_empty() {
        writeln!(out, "\nFree space:").unwrap();
        for r in &report.empty_regions {
            writeln!(out, "- {}", region_sentence(r)).unwrap();
        }
    }
    if let Some(m) = &report.metrics {
        writeln!(out, "\nMetrics:").unwrap();
        metrics_lines(m, &mut out);
    }
    out
}
