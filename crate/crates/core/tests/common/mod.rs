//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use modelsmith::harness::benchmark;
use modelsmith::learn::{parse_traces, Trace};
use modelsmith::pddl::{Atom, Domain, GroundAtom, OperatorSchema, Problem, OBJECT_TYPE};
use rand::seq::SliceRandom;
use rand::Rng;

pub const TOWER_INVERSION: &str = include_str!("../../assets/domains/blocksworld/tower-inversion.trace");

pub fn load(name: &str) -> (Domain, Vec<Problem>) {
    benchmark(name).expect("built-in benchmark").load().expect("benchmark parses")
}

pub fn tower_inversion() -> Vec<Trace> {
    parse_traces(TOWER_INVERSION).expect("trace parses")
}

/// Random blocksworld state over `n` blocks: a shuffled stack order cut into towers.
pub fn random_blocks(rng: &mut impl Rng, n: usize, name: &str) -> Problem {
    let mut blocks: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    blocks.shuffle(rng);
    let mut p = Problem::new(name, "blocksworld");
    for b in &blocks {
        p.objects.insert(b.clone(), OBJECT_TYPE.to_string());
    }
    p.init.insert(GroundAtom::new("handempty", &[]));
    let mut i = 0;
    while i < n {
        let height = rng.gen_range(1..=n - i);
        let tower = &blocks[i..i + height];
        p.init.insert(GroundAtom::new("ontable", &[&tower[0]]));
        for w in tower.windows(2) {
            p.init.insert(GroundAtom::new("on", &[&w[1], &w[0]]));
        }
        p.init.insert(GroundAtom::new("clear", &[&tower[height - 1]]));
        i += height;
    }
    p
}

/// Random gripper state with two rooms, two grippers and `balls` balls on the floor.
pub fn random_gripper(rng: &mut impl Rng, balls: usize, name: &str) -> Problem {
    let mut p = Problem::new(name, "gripper");
    let rooms = ["rooma", "roomb"];
    for r in rooms {
        p.objects.insert(r.into(), "room".into());
    }
    for g in ["left", "right"] {
        p.objects.insert(g.into(), "gripper".into());
        p.init.insert(GroundAtom::new("free", &[g]));
    }
    p.init.insert(GroundAtom::new("at-robby", &[rooms[rng.gen_range(0..2)]]));
    for b in 0..balls {
        let ball = format!("ball{}", b + 1);
        p.objects.insert(ball.clone(), "ball".into());
        p.init.insert(GroundAtom::new("at", &[&ball, rooms[rng.gen_range(0..2)]]));
    }
    p
}

/// One random slot change that keeps the schema well formed: drop a
/// precondition (with its delete), drop an add or a delete, delete a kept
/// precondition, or add a candidate atom outside the precondition.
pub fn mutate(schema: &OperatorSchema, candidates: &[Atom], rng: &mut impl Rng) -> OperatorSchema {
    loop {
        let mut m = schema.clone();
        match rng.gen_range(0..5) {
            0 => {
                let Some(a) = pick(&m.pre, rng) else { continue };
                m.pre.remove(&a);
                m.del.remove(&a);
            }
            1 => {
                let Some(a) = pick(&m.add, rng) else { continue };
                m.add.remove(&a);
            }
            2 => {
                let Some(a) = pick(&m.del, rng) else { continue };
                m.del.remove(&a);
            }
            3 => {
                let open: BTreeSet<Atom> = m.pre.difference(&m.del).cloned().collect();
                let Some(a) = pick(&open, rng) else { continue };
                m.del.insert(a);
            }
            _ => {
                let open: BTreeSet<Atom> = candidates
                    .iter()
                    .filter(|a| !m.pre.contains(a) && !m.add.contains(a))
                    .cloned()
                    .collect();
                let Some(a) = pick(&open, rng) else { continue };
                m.add.insert(a);
            }
        }
        assert!(m.violations().is_empty(), "mutation keeps {} well formed", m.name);
        return m;
    }
}

fn pick(set: &BTreeSet<Atom>, rng: &mut impl Rng) -> Option<Atom> {
    if set.is_empty() {
        return None;
    }
    set.iter().nth(rng.gen_range(0..set.len())).cloned()
}

pub fn schema<'a>(model: &'a [OperatorSchema], name: &str) -> &'a OperatorSchema {
    model.iter().find(|s| s.name == name).expect("schema present")
}
