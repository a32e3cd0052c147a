//! PDDL data model, parser, printer and ground execution semantics.

pub mod ground;
pub mod parser;
pub mod printer;
pub mod sexpr;
pub mod types;

#[cfg(test)]
pub(crate) mod fixtures;

use thiserror::Error;

pub use ground::{
    applicable, instantiate, replay, replay_actions, successor, triggered, GroundAction, GroundAtom,
    GroundCondEffect, GroundLiteral, GroundPrecondition, GroundState, Plan, PlanStep, Replay,
};
pub use parser::{parse_domain, parse_plan, parse_problem};
pub use printer::{print_domain, print_plan, print_problem};
pub use sexpr::Pos;
pub use types::{
    variable_name, Action, Atom, CondEffect, Domain, Literal, OperatorSchema, Param, Precondition,
    PredicateSignature, Problem, Requirement, SchemaViolation, Term, TypeHierarchy, EQUALITY, OBJECT_TYPE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unsupported requirement {flag} at {pos}")]
    UnsupportedRequirement { flag: String, pos: Pos },
    #[error("unsupported construct `{feature}` at {pos}")]
    Unsupported { feature: String, pos: Pos },
    #[error("predicate {predicate} expects {expected} arguments, found {found} at {pos}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },
    #[error("unknown type {name} at {pos}")]
    UnknownType { name: String, pos: Pos },
    #[error("unknown predicate {name} at {pos}")]
    UnknownPredicate { name: String, pos: Pos },
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("action {action} expects {expected} arguments, found {found}")]
    ActionArity {
        action: String,
        expected: usize,
        found: usize,
    },
    #[error("action {action} is not applicable")]
    NotApplicable { action: String },
    #[error("{0}")]
    Semantic(String),
}

impl PddlError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        PddlError::Syntax {
            pos,
            message: message.into(),
        }
    }
}
