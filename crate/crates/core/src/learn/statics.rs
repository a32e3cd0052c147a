//! Observational detection of static predicates and of static preconditions
//! that can or cannot hold.

use std::collections::{BTreeMap, BTreeSet};

use crate::pddl::{Atom, GroundAtom, GroundState, Term};

use super::hypothesis::HypothesisSpace;
use super::task::{Header, LearningTask};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticAnalysis {
    /// Predicates whose extension is identical in the initial and final state of every label.
    pub static_predicates: BTreeSet<String>,
    /// Per schema, static candidate atoms that can never hold when the schema is applied.
    pub forbidden: BTreeMap<String, BTreeSet<Atom>>,
    /// Per schema, the remaining static candidate atoms.
    pub retained: BTreeMap<String, BTreeSet<Atom>>,
    /// Per schema, retained atoms that hold at every observed plan occurrence.
    /// Empty when no plans are given or the schema never occurs.
    pub forced: BTreeMap<String, BTreeSet<Atom>>,
}

impl StaticAnalysis {
    pub fn is_static(&self, predicate: &str) -> bool {
        self.static_predicates.contains(predicate)
    }

    pub fn is_forbidden(&self, schema: &str, atom: &Atom) -> bool {
        self.forbidden.get(schema).is_some_and(|s| s.contains(atom))
    }

    pub fn is_forced(&self, schema: &str, atom: &Atom) -> bool {
        self.forced.get(schema).is_some_and(|s| s.contains(atom))
    }
}

fn extension<'a>(state: &'a GroundState, predicate: &str) -> BTreeSet<&'a GroundAtom> {
    state.atoms.iter().filter(|a| a.predicate == predicate).collect()
}

fn var_index(t: &Term) -> usize {
    match t {
        Term::Var(v) => v[1..].parse::<usize>().expect("hypothesis atoms use v1..vn") - 1,
        Term::Const(_) => unreachable!("hypothesis atoms have no constants"),
    }
}

/// Whether some type-consistent binding of the header's parameters makes
/// `atom` true in `state`.
fn satisfiable(task: &LearningTask, header: &Header, atom: &Atom, state: &GroundState, objects: &BTreeMap<String, String>) -> bool {
    state.atoms.iter().filter(|g| g.predicate == atom.predicate).any(|g| {
        let mut bound: BTreeMap<usize, &str> = BTreeMap::new();
        atom.args.iter().zip(&g.args).all(|(t, o)| {
            let i = var_index(t);
            let fits = objects
                .get(o)
                .is_some_and(|ty| task.types.is_subtype(ty, &header.param_types[i]));
            fits && *bound.entry(i).or_insert(o) == o.as_str()
        })
    })
}

fn holds_at(atom: &Atom, args: &[String], state: &GroundState) -> bool {
    let g = GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom.args.iter().map(|t| args[var_index(t)].clone()).collect(),
    };
    state.contains(&g)
}

pub fn analyze_statics(task: &LearningTask, hs: &HypothesisSpace) -> StaticAnalysis {
    let static_predicates: BTreeSet<String> = task
        .predicates
        .keys()
        .filter(|p| {
            task.labels
                .iter()
                .all(|l| extension(&l.initial, p) == extension(&l.final_state, p))
        })
        .cloned()
        .collect();
    let mut out = StaticAnalysis {
        static_predicates,
        ..Default::default()
    };
    for header in &task.headers {
        let candidates: Vec<&Atom> = hs
            .get(&header.name)
            .iter()
            .filter(|a| out.static_predicates.contains(&a.predicate))
            .collect();
        // (label index, arguments) of every plan occurrence of this schema
        let occurrences: Vec<(usize, &[String])> = task
            .plans
            .iter()
            .flatten()
            .enumerate()
            .flat_map(|(t, plan)| {
                plan.steps
                    .iter()
                    .filter(|s| s.name == header.name)
                    .map(move |s| (t, s.args.as_slice()))
            })
            .collect();
        let mut forbidden = BTreeSet::new();
        let mut retained = BTreeSet::new();
        let mut forced = BTreeSet::new();
        for atom in candidates {
            let possible = task
                .labels
                .iter()
                .any(|l| satisfiable(task, header, atom, &l.initial, &l.objects));
            let observed = occurrences
                .iter()
                .filter(|(t, args)| holds_at(atom, args, &task.labels[*t].initial))
                .count();
            if !possible || (!occurrences.is_empty() && observed == 0) {
                forbidden.insert(atom.clone());
            } else {
                if !occurrences.is_empty() && observed == occurrences.len() {
                    forced.insert(atom.clone());
                }
                retained.insert(atom.clone());
            }
        }
        out.forbidden.insert(header.name.clone(), forbidden);
        out.retained.insert(header.name.clone(), retained);
        out.forced.insert(header.name.clone(), forced);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::hypothesis::build_hypothesis_space;
    use crate::learn::task::parse_traces;
    use crate::pddl::parse_domain;

    const LIFT: &str = "(define (domain lift) (:requirements :strips)
        (:predicates (above ?a ?b) (at ?f))
        (:action up :parameters (?f1 ?f2) :precondition (and (at ?f1) (above ?f2 ?f1))
          :effect (and (not (at ?f1)) (at ?f2))))";

    #[test]
    fn detects_static_and_forbidden_atoms() {
        let traces = parse_traces(
            "(trace (:objects f0 f1 f2) (:init (at f0) (above f1 f0) (above f2 f1) (above f2 f0))
               (:plan (up f0 f1) (up f1 f2)) (:final (at f2) (above f1 f0) (above f2 f1) (above f2 f0)))",
        )
        .unwrap();
        let d = parse_domain(LIFT).unwrap();
        let with_plans = LearningTask::new(&d, &traces, true, None).unwrap();
        let hs = build_hypothesis_space(&with_plans);
        let sa = analyze_statics(&with_plans, &hs);
        assert_eq!(sa.static_predicates, BTreeSet::from(["above".to_string()]));
        let v = |a: &str, b: &str| Atom::vars("above", &[a, b]);
        // nothing is above itself
        assert!(sa.is_forbidden("up", &v("v1", "v1")));
        assert!(sa.is_forbidden("up", &v("v2", "v2")));
        // never true at an occurrence
        assert!(sa.is_forbidden("up", &v("v1", "v2")));
        assert!(sa.is_forced("up", &v("v2", "v1")));
        let all: BTreeSet<_> = hs.get("up").iter().filter(|a| a.predicate == "above").cloned().collect();
        let union: BTreeSet<_> = sa.forbidden["up"].union(&sa.retained["up"]).cloned().collect();
        assert_eq!(union, all);
        assert!(sa.forbidden["up"].is_disjoint(&sa.retained["up"]));

        let labels_only = LearningTask::new(&d, &traces, false, None).unwrap();
        let sa = analyze_statics(&labels_only, &hs);
        assert!(!sa.is_forbidden("up", &v("v1", "v2")));
        assert!(sa.forced["up"].is_empty());
    }
}
