//! The placement predicate language: AST, wire-format parsing, grammar
//! validation and solvedness analysis.

mod ast;
mod grammar;
mod parse;
mod solvedness;

pub use ast::{
    category_of, is_group_id, is_valid_object_id, Entry, Params, PredicateProgram, Reference,
    Relation, Statement, Subject, GROUP_PREFIX, ROOT,
};
pub use grammar::{validate_grammar, GrammarIssue};
pub use parse::{parse_program, serialize_program, Position, SyntaxError};
pub use solvedness::{
    analyze_solvedness, flags_of, unsolved_objects, SolvedFlags, SolvednessStatus,
};
