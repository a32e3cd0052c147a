//! Experiment harness: trace generation, the end-to-end learning pipeline
//! and report emission.

pub mod domains;
pub mod pipeline;
pub mod traces;

use thiserror::Error;

use crate::learn::LearnError;
use crate::model::ModelError;
use crate::pddl::PddlError;
use crate::planner::PlannerError;

pub use domains::{benchmark, benchmarks, Benchmark};
pub use pipeline::{
    run_pipeline, solve_compiled, ExperimentConfig, PlannerChoice, Report, Row, RowOutcome, SolveRun, Stage, TaskVariant,
};
pub use traces::{gen_traces, TraceConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("random walk from {problem} hit a dead end {retries} times")]
    DeadEnd { problem: String, retries: usize },
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
