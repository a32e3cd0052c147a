//! Learning tasks and their compilation into classical planning tasks.

pub mod compile;
pub mod hypothesis;
pub mod reach;
pub mod rollout;
pub mod statics;
pub mod task;

use thiserror::Error;

use crate::pddl::{Atom, PddlError};

pub use compile::{
    compile_lambda, compile_lambda_prime, inject_partial_model, prune_with_statics, CompileOptions, CompiledTask,
    DecodeEntry, SlotConfig, SlotKind, Variant,
};
pub use hypothesis::{build_hypothesis_space, HypothesisSpace};

pub use reach::ReachabilityHeuristic;
pub use rollout::RolloutHeuristic;
pub use statics::{analyze_statics, StaticAnalysis};
pub use task::{
    half_partial_model, parse_traces, partial_model_from_domain, print_traces, Header, KnownSchema, Label,
    LearningTask, PartialModel, Trace,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("learning task has no labels")]
    NoLabels,
    #[error("unknown operator header {0}")]
    UnknownHeader(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("invalid learning task: {0}")]
    Invalid(String),
    #[error("partial model for {schema} mentions {atom}, which is outside its hypothesis space")]
    OutsideHypothesis { schema: String, atom: Atom },
    #[error("partial model for {schema} is malformed: {reason}")]
    MalformedPartialModel { schema: String, reason: String },
    #[error("name clash in compiled task: {0}")]
    NameClash(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
}
