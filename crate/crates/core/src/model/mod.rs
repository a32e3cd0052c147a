//! Learned models: decoding from solution plans, validation against
//! learning tasks, and precision/recall scoring.

pub mod decode;
pub mod score;
pub mod validate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::learn::{LearningTask, SlotKind};
use crate::pddl::{Atom, Domain, OperatorSchema, PddlError, Requirement};
use crate::planner::PlannerError;

pub use decode::decode;
pub use score::{score, Counts, ModelScore, Scope};
pub use validate::{validate_by_compilation, validate_by_replay, CompiledVerdict, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotOrigin {
    Programmed,
    GivenInPartialModel,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedModel {
    /// Sorted by name, over parameters `v1..vn`.
    pub schemas: Vec<OperatorSchema>,
    /// Origin of every candidate slot of every schema.
    pub provenance: BTreeMap<(String, SlotKind, Atom), SlotOrigin>,
}

impl LearnedModel {
    pub fn schema(&self, name: &str) -> Option<&OperatorSchema> {
        self.schemas.iter().find(|s| s.name == name)
    }

    /// The model as a STRIPS domain over the task's types and predicates.
    pub fn to_domain(&self, task: &LearningTask) -> Domain {
        schemas_to_domain(&self.schemas, task)
    }
}

/// A STRIPS domain holding `schemas` over the task's types and predicates.
pub fn schemas_to_domain(schemas: &[OperatorSchema], task: &LearningTask) -> Domain {
    let mut d = Domain::new(&task.domain_name);
    d.requirements.insert(Requirement::Strips);
    if !task.types.is_empty() {
        d.requirements.insert(Requirement::Typing);
    }
    d.types = task.types.clone();
    for p in task.predicates.values() {
        d.add_predicate(p.clone());
    }
    for s in schemas {
        d.add_action(s.to_action());
    }
    d
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("plan does not solve the compiled task: {0}")]
    PlanReplay(String),
    #[error("decode table does not match the compiled task: {0}")]
    DecodeTable(String),
    #[error("decoded schema {schema} is not well formed: {detail}")]
    IllFormed { schema: String, detail: String },
    #[error("model and reference disagree on schema names: {0}")]
    NameMismatch(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Learn(#[from] crate::learn::LearnError),
}
