use serde_json::Value;
use thiserror::Error;

use super::ast::{Entry, Params, PredicateProgram, Reference, Relation, Statement, Subject};

/// Where a syntax error was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// Line and column in the source text (1-based).
    Text { line: usize, column: usize },
    /// Index of the offending entry in the top-level array.
    Entry(usize),
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Position::Text { line, column } => write!(f, "line {line}, column {column}"),
            Position::Entry(i) => write!(f, "entry {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at {position}: {message}")]
pub struct SyntaxError {
    pub position: Position,
    pub message: String,
}

fn at(entry: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        position: Position::Entry(entry),
        message: message.into(),
    }
}

/// Parses the JSON-array wire format. Length-2 entries are descriptions and
/// length-4 entries are statements; relation names are not checked here.
pub fn parse_program(text: &str) -> Result<PredicateProgram, SyntaxError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SyntaxError {
        position: Position::Text {
            line: e.line(),
            column: e.column(),
        },
        message: e.to_string(),
    })?;
    let Value::Array(items) = value else {
        return Err(SyntaxError {
            position: Position::Text { line: 1, column: 1 },
            message: "top level must be a JSON array".into(),
        });
    };
    let mut entries = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let Value::Array(parts) = item else {
            return Err(at(i, "entry must be an array"));
        };
        entries.push(match parts.len() {
            2 => parse_description(i, parts)?,
            4 => Entry::Statement(parse_statement(i, parts)?),
            n => {
                return Err(at(
                    i,
                    format!("entry has {n} elements; expected 2 (description) or 4 (statement)"),
                ))
            }
        });
    }
    Ok(PredicateProgram { entries })
}

fn parse_description(i: usize, parts: Vec<Value>) -> Result<Entry, SyntaxError> {
    match (&parts[0], &parts[1]) {
        (Value::String(id), Value::String(text)) => Ok(Entry::Description {
            id: id.clone(),
            text: text.clone(),
        }),
        _ => Err(at(i, "description must be [object_id, text] strings")),
    }
}

fn parse_statement(i: usize, mut parts: Vec<Value>) -> Result<Statement, SyntaxError> {
    let params = match parts.pop().expect("four parts") {
        Value::Object(m) => m.into_iter().collect::<Params>(),
        _ => return Err(at(i, "params must be a JSON object")),
    };
    let reference = match parts.pop().expect("four parts") {
        Value::String(s) => Reference::Id(s),
        Value::Array(items) => Reference::Members(
            items
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s),
                    _ => Err(at(i, "member list must contain object ids")),
                })
                .collect::<Result<_, _>>()?,
        ),
        _ => return Err(at(i, "reference must be an id or a member list")),
    };
    let relation = match parts.pop().expect("four parts") {
        Value::String(s) => Relation::from_name(&s),
        _ => return Err(at(i, "relation must be a string")),
    };
    let subject = match parts.pop().expect("four parts") {
        Value::String(s) => Subject::Id(s),
        Value::Array(items) => Subject::Batch(
            items
                .into_iter()
                .map(|v| parse_batch_item(i, v))
                .collect::<Result<_, _>>()?,
        ),
        _ => return Err(at(i, "subject must be an id or a batch specification")),
    };
    Ok(Statement {
        subject,
        relation,
        reference,
        params,
    })
}

fn parse_batch_item(i: usize, v: Value) -> Result<(String, u64), SyntaxError> {
    let err = || {
        at(
            i,
            "batch items must be [category, count] with a non-negative integer count",
        )
    };
    let Value::Array(pair) = v else {
        return Err(err());
    };
    match pair.as_slice() {
        [Value::String(c), Value::Number(n)] => n.as_u64().map(|k| (c.clone(), k)).ok_or_else(err),
        _ => Err(err()),
    }
}

fn entry_value(e: &Entry) -> Value {
    match e {
        Entry::Description { id, text } => {
            Value::Array(vec![Value::String(id.clone()), Value::String(text.clone())])
        }
        Entry::Statement(s) => {
            let subject = match &s.subject {
                Subject::Id(id) => Value::String(id.clone()),
                Subject::Batch(items) => Value::Array(
                    items
                        .iter()
                        .map(|(c, n)| Value::Array(vec![Value::String(c.clone()), Value::from(*n)]))
                        .collect(),
                ),
            };
            let reference = match &s.reference {
                Reference::Id(id) => Value::String(id.clone()),
                Reference::Members(m) => {
                    Value::Array(m.iter().cloned().map(Value::String).collect())
                }
            };
            let params = Value::Object(s.params.clone().into_iter().collect());
            Value::Array(vec![
                subject,
                Value::String(s.relation.name().to_string()),
                reference,
                params,
            ])
        }
    }
}

/// Serializes a program to the wire format, one entry per line.
pub fn serialize_program(program: &PredicateProgram) -> String {
    if program.entries.is_empty() {
        return "[]".to_string();
    }
    let lines: Vec<String> = program
        .entries
        .iter()
        .map(|e| format!("  {}", entry_value(e)))
        .collect();
    format!("[\n{}\n]", lines.join(",\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_fragment_parses() {
        let p = parse_program(r#"[["laptop_0","a slim silver laptop"],["laptop_0","PLACE-ON-BASE","root",{"x":0.0,"y":0.0}]]"#).unwrap();
        assert_eq!(p.descriptions().count(), 1);
        assert_eq!(p.statements().count(), 1);
        let (_, s) = p.statements().next().unwrap();
        assert_eq!(s.relation, Relation::PlaceOnBase);
        assert_eq!(s.number("x"), Some(0.0));
    }

    #[test]
    fn empty_program() {
        assert!(parse_program("[]").unwrap().entries.is_empty());
    }

    #[test]
    fn arity_three_is_rejected() {
        let e = parse_program(r#"[["a","b","c"]]"#).unwrap_err();
        assert_eq!(e.position, Position::Entry(0));
    }

    #[test]
    fn malformed_json_reports_text_position() {
        let e = parse_program("[\n  [\"a\", \"b\"\n").unwrap_err();
        assert!(matches!(e.position, Position::Text { line: 3, .. }));
    }

    #[test]
    fn unknown_relations_survive_parsing() {
        let p = parse_program(r#"[["a_0","HOVER-ABOVE","root",{}]]"#).unwrap();
        assert_eq!(
            p.statements().next().unwrap().1.relation,
            Relation::Unknown("HOVER-ABOVE".into())
        );
    }

    #[test]
    fn batch_and_members_round_trip() {
        let text = r#"[[[["pen",6],["pencil",3]],"PLACE-IN","pen_holder_0",{}],["group_a","GROUP",["x_0","y_0"],{"anchor":"x_0"}]]"#;
        let p = parse_program(text).unwrap();
        assert_eq!(parse_program(&serialize_program(&p)).unwrap(), p);
    }
}
