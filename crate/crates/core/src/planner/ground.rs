//! Grounding by relaxed reachability followed by constant-atom simplification.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::pddl::{
    Action, Domain, GroundAtom, Literal, Precondition, Problem, Term, TypeHierarchy, EQUALITY,
};

use super::task::{Condition, Effect, GroundTask, Lit, Operator, State};
use super::PlannerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundConfig {
    /// Prune actions whose positive preconditions are unreachable in the
    /// delete relaxation. Sound: such actions never become applicable.
    pub prune_unreachable: bool,
    pub max_operators: usize,
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self {
            prune_unreachable: true,
            max_operators: 500_000,
        }
    }
}

struct Universe<'a> {
    types: &'a TypeHierarchy,
    objects: BTreeMap<String, String>,
    by_type: HashMap<String, Vec<String>>,
}

impl<'a> Universe<'a> {
    fn new(domain: &'a Domain, problem: &Problem) -> Self {
        let mut objects = domain.constants.clone();
        objects.extend(problem.objects.iter().map(|(a, b)| (a.clone(), b.clone())));
        Self {
            types: &domain.types,
            objects,
            by_type: HashMap::new(),
        }
    }

    fn of_type(&mut self, ty: &str) -> &[String] {
        if !self.by_type.contains_key(ty) {
            let list = self
                .objects
                .iter()
                .filter(|(_, t)| self.types.is_subtype(t, ty))
                .map(|(o, _)| o.clone())
                .collect();
            self.by_type.insert(ty.to_string(), list);
        }
        &self.by_type[ty]
    }

    fn fits(&self, object: &str, ty: &str) -> bool {
        self.objects.get(object).is_some_and(|t| self.types.is_subtype(t, ty))
    }
}

fn is_equality(lit: &Literal) -> bool {
    lit.atom.predicate == EQUALITY
}

struct Binder<'a> {
    action: &'a Action,
    params: HashMap<&'a str, usize>,
}

impl<'a> Binder<'a> {
    fn new(action: &'a Action) -> Self {
        Self {
            action,
            params: action.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect(),
        }
    }

    fn ground_atom(&self, lit: &Literal, binding: &[String]) -> GroundAtom {
        GroundAtom {
            predicate: lit.atom.predicate.clone(),
            args: lit
                .atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => binding[self.params[v.as_str()]].clone(),
                    Term::Const(c) => c.clone(),
                })
                .collect(),
        }
    }

    /// Extends `binding` so that `lit`'s atom matches `fact`.
    fn unify(&self, lit: &Literal, fact: &GroundAtom, binding: &mut [Option<String>], uni: &Universe) -> bool {
        for (t, o) in lit.atom.args.iter().zip(&fact.args) {
            match t {
                Term::Const(c) => {
                    if c != o {
                        return false;
                    }
                }
                Term::Var(v) => {
                    let i = self.params[v.as_str()];
                    match &binding[i] {
                        Some(b) if b != o => return false,
                        Some(_) => {}
                        None => {
                            if !uni.fits(o, &self.action.params[i].ty) {
                                return false;
                            }
                            binding[i] = Some(o.clone());
                        }
                    }
                }
            }
        }
        true
    }

    /// All bindings satisfying the positive simple preconditions against
    /// `facts` (or every typed binding when `facts` is `None`).
    fn bindings(
        &self,
        facts: Option<&HashMap<String, Vec<GroundAtom>>>,
        uni: &mut Universe,
        limit: usize,
        out: &mut Vec<Vec<String>>,
    ) -> Result<(), usize> {
        let anchors: Vec<&Literal> = match facts {
            Some(_) => self
                .action
                .precondition
                .iter()
                .filter_map(|p| match p {
                    Precondition::Lit(l) if l.positive && !is_equality(l) => Some(l),
                    _ => None,
                })
                .collect(),
            None => Vec::new(),
        };
        let mut binding = vec![None; self.action.params.len()];
        self.extend(&anchors, facts, &mut binding, uni, limit, out)
    }

    fn extend(
        &self,
        anchors: &[&Literal],
        facts: Option<&HashMap<String, Vec<GroundAtom>>>,
        binding: &mut Vec<Option<String>>,
        uni: &mut Universe,
        limit: usize,
        out: &mut Vec<Vec<String>>,
    ) -> Result<(), usize> {
        if let Some((lit, rest)) = anchors.split_first() {
            let empty = Vec::new();
            let candidates = facts.and_then(|f| f.get(&lit.atom.predicate)).unwrap_or(&empty);
            for fact in candidates {
                let saved = binding.clone();
                if self.unify(lit, fact, binding, uni) {
                    self.extend(rest, facts, binding, uni, limit, out)?;
                }
                *binding = saved;
            }
            return Ok(());
        }
        match binding.iter().position(Option::is_none) {
            Some(i) => {
                let objects = uni.of_type(&self.action.params[i].ty).to_vec();
                for o in objects {
                    binding[i] = Some(o);
                    self.extend(anchors, facts, binding, uni, limit, out)?;
                }
                binding[i] = None;
                Ok(())
            }
            None => {
                if out.len() >= limit {
                    return Err(out.len() + 1);
                }
                out.push(binding.iter().map(|b| b.clone().expect("complete")).collect());
                Ok(())
            }
        }
    }
}

/// Relaxed truth of a literal: negative literals are assumed achievable.
fn relaxed(lit: &Literal, ground: &GroundAtom, reached: &HashSet<GroundAtom>) -> bool {
    if is_equality(lit) {
        (ground.args[0] == ground.args[1]) == lit.positive
    } else {
        !lit.positive || reached.contains(ground)
    }
}

struct Candidate<'a> {
    action: &'a Action,
    args: Vec<String>,
}

fn relaxed_applicable(binder: &Binder, args: &[String], reached: &HashSet<GroundAtom>) -> bool {
    binder.action.precondition.iter().all(|p| match p {
        Precondition::Lit(l) => relaxed(l, &binder.ground_atom(l, args), reached),
        Precondition::Or(a, b) => {
            relaxed(a, &binder.ground_atom(a, args), reached) || relaxed(b, &binder.ground_atom(b, args), reached)
        }
    })
}

/// Instantiates every action of `domain` over the objects of `domain` and
/// `problem`, with repetition and type checks.
pub fn ground(domain: &Domain, problem: &Problem, config: &GroundConfig) -> Result<GroundTask, PlannerError> {
    let mut uni = Universe::new(domain, problem);
    let binders: Vec<Binder> = domain.actions.values().map(Binder::new).collect();
    let mut reached: HashSet<GroundAtom> = problem.init.iter().cloned().collect();
    let mut candidates: Vec<Candidate>;
    loop {
        let mut by_pred: HashMap<String, Vec<GroundAtom>> = HashMap::new();
        let mut sorted: Vec<&GroundAtom> = reached.iter().collect();
        sorted.sort();
        for a in sorted {
            by_pred.entry(a.predicate.clone()).or_default().push(a.clone());
        }
        candidates = Vec::new();
        for b in &binders {
            let mut out = Vec::new();
            let facts = config.prune_unreachable.then_some(&by_pred);
            let limit = config.max_operators.saturating_sub(candidates.len());
            b.bindings(facts, &mut uni, limit, &mut out).map_err(|n| PlannerError::GroundingLimit {
                operators: candidates.len() + n,
                limit: config.max_operators,
            })?;
            for args in out {
                if !config.prune_unreachable || relaxed_applicable(b, &args, &reached) {
                    candidates.push(Candidate { action: b.action, args });
                }
            }
        }
        let before = reached.len();
        for c in &candidates {
            let b = Binder::new(c.action);
            for e in &c.action.effects {
                let enabled = e
                    .condition
                    .iter()
                    .all(|l| relaxed(l, &b.ground_atom(l, &c.args), &reached));
                if !enabled {
                    continue;
                }
                for l in e.effect.iter().filter(|l| l.positive) {
                    reached.insert(b.ground_atom(l, &c.args));
                }
            }
        }
        if !config.prune_unreachable || reached.len() == before {
            break;
        }
    }
    build(problem, candidates)
}

enum Simplified {
    True,
    False,
    Lit(Lit),
}

struct Indexer<'a> {
    fluents: &'a BTreeMap<GroundAtom, u32>,
    init: &'a BTreeSet<GroundAtom>,
}

impl Indexer<'_> {
    fn lit(&self, atom: &GroundAtom, positive: bool) -> Simplified {
        if atom.predicate == EQUALITY {
            return if (atom.args[0] == atom.args[1]) == positive {
                Simplified::True
            } else {
                Simplified::False
            };
        }
        match self.fluents.get(atom) {
            Some(&i) => Simplified::Lit(Lit { atom: i, positive }),
            None if self.init.contains(atom) == positive => Simplified::True,
            None => Simplified::False,
        }
    }
}

fn build(problem: &Problem, candidates: Vec<Candidate>) -> Result<GroundTask, PlannerError> {
    let mut fluent_set: BTreeSet<GroundAtom> = BTreeSet::new();
    for c in &candidates {
        let b = Binder::new(c.action);
        for e in &c.action.effects {
            for l in &e.effect {
                fluent_set.insert(b.ground_atom(l, &c.args));
            }
        }
    }
    let fluents: BTreeMap<GroundAtom, u32> = fluent_set
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a, i as u32))
        .collect();
    let ix = Indexer {
        fluents: &fluents,
        init: &problem.init,
    };
    let mut operators = Vec::with_capacity(candidates.len());
    'ops: for c in &candidates {
        let b = Binder::new(c.action);
        let mut pre = Vec::new();
        for p in &c.action.precondition {
            match p {
                Precondition::Lit(l) => match ix.lit(&b.ground_atom(l, &c.args), l.positive) {
                    Simplified::True => {}
                    Simplified::False => continue 'ops,
                    Simplified::Lit(x) => pre.push(Condition::Lit(x)),
                },
                Precondition::Or(l1, l2) => {
                    let a = ix.lit(&b.ground_atom(l1, &c.args), l1.positive);
                    let z = ix.lit(&b.ground_atom(l2, &c.args), l2.positive);
                    match (a, z) {
                        (Simplified::True, _) | (_, Simplified::True) => {}
                        (Simplified::False, Simplified::False) => continue 'ops,
                        (Simplified::False, Simplified::Lit(x)) | (Simplified::Lit(x), Simplified::False) => {
                            pre.push(Condition::Lit(x))
                        }
                        (Simplified::Lit(x), Simplified::Lit(y)) => pre.push(Condition::Or(x, y)),
                    }
                }
            }
        }
        let mut effects = Vec::new();
        'effects: for e in &c.action.effects {
            let mut condition = Vec::new();
            for l in &e.condition {
                match ix.lit(&b.ground_atom(l, &c.args), l.positive) {
                    Simplified::True => {}
                    Simplified::False => continue 'effects,
                    Simplified::Lit(x) => condition.push(x),
                }
            }
            let mut add = Vec::new();
            let mut del = Vec::new();
            for l in &e.effect {
                let i = fluents[&b.ground_atom(l, &c.args)];
                if l.positive {
                    add.push(i);
                } else {
                    del.push(i);
                }
            }
            effects.push(Effect { condition, add, del });
        }
        operators.push(Operator {
            name: c.action.name.clone(),
            args: c.args.clone(),
            pre,
            effects,
        });
    }
    operators.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));
    let mut init = State::empty(fluents.len());
    for a in &problem.init {
        if let Some(&i) = fluents.get(a) {
            init.set(i, true);
        }
    }
    let mut goal = Vec::new();
    let mut goal_unreachable = false;
    for g in &problem.goal {
        match ix.lit(&g.atom, g.positive) {
            Simplified::True => {}
            Simplified::False => goal_unreachable = true,
            Simplified::Lit(x) => goal.push(x),
        }
    }
    let atoms: Vec<GroundAtom> = fluents.keys().cloned().collect();
    let atom_index = fluents.into_iter().collect();
    Ok(GroundTask {
        atoms,
        atom_index,
        operators,
        init,
        goal,
        goal_unreachable,
    })
}

/// Convenience for one-off grounding with default limits.
pub fn ground_default(domain: &Domain, problem: &Problem) -> Result<GroundTask, PlannerError> {
    ground(domain, problem, &GroundConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{compile_lambda, parse_traces, CompileOptions, LearningTask};
    use crate::pddl::fixtures::blocksworld;
    use crate::pddl::{parse_domain, parse_problem};

    const TOWER: &str = include_str!("../../assets/domains/blocksworld/tower-inversion.trace");

    fn tower_compiled() -> (Domain, Problem) {
        let task = LearningTask::new(&blocksworld(), &parse_traces(TOWER).unwrap(), false, None).unwrap();
        let c = compile_lambda(&task, CompileOptions::default()).unwrap();
        (c.domain(), c.problem())
    }

    #[test]
    fn apply_stack_grounds_over_every_block_pair() {
        let (d, p) = tower_compiled();
        let unpruned = GroundConfig {
            prune_unreachable: false,
            ..GroundConfig::default()
        };
        for config in [GroundConfig::default(), unpruned] {
            let gt = ground(&d, &p, &config).unwrap();
            let stacks: Vec<&Operator> = gt.operators_named("apply_stack").collect();
            assert_eq!(stacks.len(), 16);
            assert!(stacks.iter().all(|o| o.implication_count() == 11), "{config:?}");
        }
    }

    #[test]
    fn propositional_task_grounds_to_itself() {
        let d = parse_domain(
            "(define (domain lamp) (:predicates (on) (off))
               (:action flip :parameters () :precondition (off) :effect (and (on) (not (off)))))",
        )
        .unwrap();
        let p = parse_problem("(define (problem l) (:domain lamp) (:init (off)) (:goal (on)))").unwrap();
        let gt = ground_default(&d, &p).unwrap();
        assert_eq!(gt.operators.len(), 1);
        assert_eq!(gt.operators[0].name, "flip");
        assert!(gt.operators[0].args.is_empty());
        assert_eq!(gt.atoms.len(), 2);
    }

    #[test]
    fn grounding_limit_reports_counts() {
        let (d, p) = tower_compiled();
        let err = ground(
            &d,
            &p,
            &GroundConfig {
                max_operators: 10,
                ..GroundConfig::default()
            },
        )
        .unwrap_err();
        match err {
            PlannerError::GroundingLimit { operators, limit } => {
                assert_eq!(limit, 10);
                assert!(operators > limit);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn types_restrict_bindings() {
        let d = parse_domain(
            "(define (domain t) (:types a b) (:predicates (p ?x - a) (q ?x - b))
               (:action go :parameters (?x - a) :precondition () :effect (p ?x)))",
        )
        .unwrap();
        let p = parse_problem("(define (problem t) (:domain t) (:objects x1 x2 - a y - b) (:init) (:goal (p x1)))").unwrap();
        let gt = ground_default(&d, &p).unwrap();
        let args: Vec<&str> = gt.operators.iter().map(|o| o.args[0].as_str()).collect();
        assert_eq!(args, ["x1", "x2"]);
    }
}
