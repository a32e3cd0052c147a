//! Hypothesis spaces: the atoms that may appear in a schema's pre, add or del lists.

use std::collections::BTreeMap;

use crate::pddl::{variable_name, Atom, Term};

use super::task::{Header, LearningTask};

/// Schema name to its candidate atoms over `v1..vn`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HypothesisSpace {
    pub atoms: BTreeMap<String, Vec<Atom>>,
}

impl HypothesisSpace {
    pub fn get(&self, schema: &str) -> &[Atom] {
        self.atoms.get(schema).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, schema: &str, atom: &Atom) -> bool {
        self.get(schema).binary_search(atom).is_ok()
    }

    /// Σ |F_v(ξ)| over all schemas.
    pub fn total(&self) -> usize {
        self.atoms.values().map(Vec::len).sum()
    }
}

/// All `k`-tuples over `0..n`, in lexicographic order.
pub(crate) fn index_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

fn atoms_for(task: &LearningTask, header: &Header) -> Vec<Atom> {
    let mut out = Vec::new();
    for sig in task.predicates.values() {
        for idx in index_tuples(header.arity(), sig.arity()) {
            let fits = idx
                .iter()
                .zip(&sig.param_types)
                .all(|(&i, ty)| task.types.compatible(&header.param_types[i], ty));
            if fits {
                out.push(Atom::new(
                    &sig.name,
                    idx.iter().map(|&i| Term::Var(variable_name(i))).collect(),
                ));
            }
        }
    }
    out.sort();
    out
}

pub fn build_hypothesis_space(task: &LearningTask) -> HypothesisSpace {
    HypothesisSpace {
        atoms: task
            .headers
            .iter()
            .map(|h| (h.name.clone(), atoms_for(task, h)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::task::parse_traces;
    use crate::pddl::fixtures::blocksworld;

    fn task() -> LearningTask {
        let traces = parse_traces(include_str!("../../assets/domains/blocksworld/tower-inversion.trace")).unwrap();
        LearningTask::new(&blocksworld(), &traces, false, None).unwrap()
    }

    #[test]
    fn stack_has_eleven_candidate_atoms() {
        let hs = build_hypothesis_space(&task());
        let stack = hs.get("stack");
        assert_eq!(stack.len(), 11);
        for a in ["(on ?v1 ?v1)", "(on ?v1 ?v2)", "(on ?v2 ?v1)", "(on ?v2 ?v2)", "(handempty)"] {
            assert!(stack.iter().any(|x| x.to_string() == a), "{a}");
        }
        assert_eq!(hs.get("pickup").len(), 5);
        assert_eq!(hs.total(), 32);
    }

    #[test]
    fn types_restrict_candidates() {
        let d = crate::pddl::parse_domain(
            "(define (domain t) (:requirements :strips :typing) (:types ball room - object)
             (:predicates (at ?b - ball ?r - room) (free))
             (:action move :parameters (?b - ball ?r - room ?s - room) :precondition () :effect ()))",
        )
        .unwrap();
        let traces = parse_traces("(trace (:objects b - ball r s - room) (:init (at b r)) (:final (at b s)))").unwrap();
        let t = LearningTask::new(&d, &traces, false, None).unwrap();
        let hs = build_hypothesis_space(&t);
        let names: Vec<String> = hs.get("move").iter().map(ToString::to_string).collect();
        assert_eq!(names, vec!["(at ?v1 ?v2)", "(at ?v1 ?v3)", "(free)"]);
    }
}
