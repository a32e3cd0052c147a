//! Grounding and forward search for classical planning tasks with
//! conditional effects, plus an adapter for external planners.

pub mod external;
pub mod ground;
pub mod heuristic;
pub mod search;
pub mod task;

use thiserror::Error;

use crate::pddl::PddlError;

pub use external::{solve_external, ExternalPlanner, PLANNER_ENV};
pub use ground::{ground, ground_default, GroundConfig};
pub use heuristic::{Blind, GoalCount, GoalCountRelaxed, Heuristic, RelaxedAdd};
pub use search::{eliminate_redundant, eliminate_redundant_except, solve, solve_with, Algorithm, Outcome, SearchConfig, SearchResult, SearchStats};
pub use task::{Condition, Effect, GroundTask, Lit, Operator, State};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("grounding produced at least {operators} operators, over the limit of {limit}")]
    GroundingLimit { operators: usize, limit: usize },
    #[error("external planner configuration: {0}")]
    ExternalConfig(String),
    #[error("external planner `{command}` failed with {status}: {stderr}")]
    ExternalFailed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("external planner timed out after {0:?}")]
    ExternalTimeout(std::time::Duration),
    #[error("external planner output: {0}")]
    ExternalOutput(String),
    #[error("external plan rejected at step {step}: {reason}")]
    ExternalPlanInvalid { step: usize, reason: String },
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
