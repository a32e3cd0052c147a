//! Propositional planning tasks with conditional effects and binary
//! disjunctive preconditions.

use std::collections::HashMap;
use std::fmt;

use crate::pddl::{GroundAtom, Plan, PlanStep};

/// Dense bitset over a task's fluent atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(Box<[u64]>);

impl State {
    pub fn empty(atoms: usize) -> Self {
        State(vec![0; atoms.div_ceil(64)].into_boxed_slice())
    }

    #[inline]
    pub fn get(&self, i: u32) -> bool {
        self.0[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u32, value: bool) {
        let w = &mut self.0[(i / 64) as usize];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub atom: u32,
    pub positive: bool,
}

impl Lit {
    #[inline]
    pub fn holds(self, s: &State) -> bool {
        s.get(self.atom) == self.positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Lit(Lit),
    Or(Lit, Lit),
}

impl Condition {
    #[inline]
    pub fn holds(self, s: &State) -> bool {
        match self {
            Condition::Lit(l) => l.holds(s),
            Condition::Or(a, b) => a.holds(s) || b.holds(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Effect {
    pub condition: Vec<Lit>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub name: String,
    pub args: Vec<String>,
    pub pre: Vec<Condition>,
    pub effects: Vec<Effect>,
}

impl Operator {
    #[inline]
    pub fn applicable(&self, s: &State) -> bool {
        self.pre.iter().all(|c| c.holds(s))
    }

    /// Successor state; conditions are evaluated in `s`, deletes precede adds.
    pub fn apply(&self, s: &State) -> State {
        let mut next = s.clone();
        let fired: Vec<&Effect> = self
            .effects
            .iter()
            .filter(|e| e.condition.iter().all(|l| l.holds(s)))
            .collect();
        for e in &fired {
            for &d in &e.del {
                next.set(d, false);
            }
        }
        for e in &fired {
            for &a in &e.add {
                next.set(a, true);
            }
        }
        next
    }

    pub fn implication_count(&self) -> usize {
        self.pre.iter().filter(|c| matches!(c, Condition::Or(..))).count()
    }

    pub fn step(&self) -> PlanStep {
        PlanStep {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Ground task over the atoms some operator can change. Atoms no operator
/// changes are compiled away during grounding.
#[derive(Debug, Clone)]
pub struct GroundTask {
    pub atoms: Vec<GroundAtom>,
    pub atom_index: HashMap<GroundAtom, u32>,
    /// Sorted by name, then arguments; the index order is the tie-breaking order.
    pub operators: Vec<Operator>,
    pub init: State,
    pub goal: Vec<Lit>,
    /// A goal literal on a constant atom is false, so no plan exists.
    pub goal_unreachable: bool,
}

impl GroundTask {
    pub fn is_goal(&self, s: &State) -> bool {
        !self.goal_unreachable && self.goal.iter().all(|l| l.holds(s))
    }

    pub fn atom(&self, atom: &GroundAtom) -> Option<u32> {
        self.atom_index.get(atom).copied()
    }

    pub fn operators_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Operator> + 'a {
        self.operators.iter().filter(move |o| o.name == name)
    }

    /// Replays operator indices from the initial state; the visited states
    /// or the index of the first inapplicable step.
    pub fn replay(&self, ops: &[usize]) -> Result<Vec<State>, usize> {
        let mut trace = vec![self.init.clone()];
        for (i, &o) in ops.iter().enumerate() {
            let cur = trace.last().expect("non-empty");
            let op = &self.operators[o];
            if !op.applicable(cur) {
                return Err(i);
            }
            trace.push(op.apply(cur));
        }
        Ok(trace)
    }

    /// True when `ops` replays and ends in a goal state.
    pub fn is_solution(&self, ops: &[usize]) -> bool {
        self.replay(ops)
            .map(|t| self.is_goal(t.last().expect("non-empty")))
            .unwrap_or(false)
    }

    pub fn plan(&self, ops: &[usize]) -> Plan {
        Plan::new(ops.iter().map(|&o| self.operators[o].step()).collect())
    }

    /// Operator indices for a lifted plan, matched by name and arguments.
    pub fn resolve(&self, plan: &Plan) -> Option<Vec<usize>> {
        let index: HashMap<(&str, &[String]), usize> = self
            .operators
            .iter()
            .enumerate()
            .map(|(i, o)| ((o.name.as_str(), o.args.as_slice()), i))
            .collect();
        plan.steps
            .iter()
            .map(|s| index.get(&(s.name.as_str(), s.args.as_slice())).copied())
            .collect()
    }

    pub fn true_atoms(&self, s: &State) -> Vec<&GroundAtom> {
        (0..self.atoms.len() as u32)
            .filter(|&i| s.get(i))
            .map(|i| &self.atoms[i as usize])
            .collect()
    }
}
