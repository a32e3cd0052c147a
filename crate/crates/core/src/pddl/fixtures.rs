//! Shared test data: the reference blocksworld and the tower-inversion trace.

use super::ground::{GroundAtom, GroundState, Plan, PlanStep};
use super::parser::parse_domain;
use super::types::{Domain, OperatorSchema};

pub const BLOCKSWORLD: &str = include_str!("../../assets/domains/blocksworld/domain.pddl");

pub fn blocksworld() -> Domain {
    parse_domain(BLOCKSWORLD).unwrap()
}

/// Reference blocksworld schemas with parameters renamed to `v1..vn`.
pub fn blocksworld_schemas() -> Vec<OperatorSchema> {
    blocksworld()
        .strips_schemas()
        .unwrap()
        .iter()
        .map(OperatorSchema::canonical)
        .collect()
}

fn ga(p: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::new(p, args)
}

pub fn tower_initial() -> GroundState {
    GroundState::new([
        ga("handempty", &[]),
        ga("clear", &["a"]),
        ga("on", &["a", "b"]),
        ga("on", &["b", "c"]),
        ga("on", &["c", "d"]),
        ga("ontable", &["d"]),
    ])
}

pub fn tower_final() -> GroundState {
    GroundState::new([
        ga("handempty", &[]),
        ga("clear", &["d"]),
        ga("on", &["d", "c"]),
        ga("on", &["c", "b"]),
        ga("on", &["b", "a"]),
        ga("ontable", &["a"]),
    ])
}

pub fn tower_plan() -> Plan {
    Plan::new(vec![
        PlanStep::new("unstack", &["a", "b"]),
        PlanStep::new("putdown", &["a"]),
        PlanStep::new("unstack", &["b", "c"]),
        PlanStep::new("stack", &["b", "a"]),
        PlanStep::new("unstack", &["c", "d"]),
        PlanStep::new("stack", &["c", "b"]),
        PlanStep::new("pickup", &["d"]),
        PlanStep::new("stack", &["d", "c"]),
    ])
}
