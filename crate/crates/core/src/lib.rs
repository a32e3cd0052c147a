//! Learning STRIPS action models by compiling the learning task into a
//! classical planning task with conditional effects.

pub mod pddl;
pub mod learn;
pub mod planner;
pub mod model;
pub mod harness;
