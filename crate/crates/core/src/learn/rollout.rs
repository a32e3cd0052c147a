//! Search guidance for the plans variant.
//!
//! While programming, the atoms of one predicate evolve only through the
//! slots of that predicate, and slots interact only through the ground atoms
//! they touch along the plans. Slots therefore split into independent
//! components, each solved exactly by branch and bound over the completions
//! still reachable from the committed slots. Completions are ranked by
//! violations plus final mismatches, then by slots the static analysis rules
//! out (effects on static predicates, preconditions no observed state can
//! satisfy), then by specificity (most kept preconditions, then most deleted
//! preconditions, then fewest adds), then by the programming actions still
//! needed. The violation sum is zero only when
//! a consistent completion exists, ignoring symmetry-breaking locks across
//! components.
//!
//! Once programming has ended the model is fixed: it is rolled forward from
//! the current step and any violation marks a dead end. Its ranking terms
//! still count, so ending programming early never beats a better completion.

use std::collections::{BTreeSet, HashMap};

use crate::pddl::{GroundAtom, Term};
use crate::planner::{GroundTask, Heuristic, State};

use super::compile::{CompiledTask, Variant, AT_STEP, MODE_PROG};
use super::statics::{analyze_statics, StaticAnalysis};
use super::LearnError;

/// Where a compiled-task atom's truth value comes from.
#[derive(Debug, Clone, Copy)]
enum Src {
    Fluent(u32),
    Const(bool),
}

impl Src {
    fn get(self, s: &State) -> bool {
        match self {
            Src::Fluent(i) => s.get(i),
            Src::Const(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
struct SchemaSlots {
    pre: Vec<Src>,
    del: Vec<Src>,
    add: Vec<Src>,
}

#[derive(Debug, Clone)]
struct Step {
    schema: usize,
    /// World-atom index per slot of the schema.
    atoms: Vec<u32>,
}

#[derive(Debug, Clone)]
struct LabelRun {
    initial: Vec<bool>,
    target: Vec<bool>,
    steps: Vec<Step>,
}

/// One ground atom of one label, with the plan events that touch it.
#[derive(Debug, Clone)]
struct Factor {
    initial: bool,
    target: bool,
    /// (plan step, component slot), in plan order.
    events: Vec<(u32, u16)>,
}

/// Slots linked through shared ground atoms.
#[derive(Debug, Clone)]
struct Component {
    /// (schema, slot) in search order.
    slots: Vec<(usize, usize)>,
    /// Keeping the precondition without deleting it is penalised: the slot
    /// has plan evidence and its predicate is not static.
    prefers_delete: Vec<bool>,
    rules: Vec<StaticRule>,
    factors: Vec<Factor>,
    /// Factors whose last slot in search order is slot `i`.
    closes: Vec<Vec<usize>>,
}

/// What the static analysis says about one slot.
#[derive(Debug, Clone, Copy, Default)]
struct StaticRule {
    /// The predicate never changes, so the slot should have no effect.
    no_effect: bool,
    /// No observation supports the atom as a precondition.
    no_pre: bool,
}

/// Committed value of a slot and what programming can still do with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SlotState {
    pre: bool,
    del: bool,
    add: bool,
    can_pre: bool,
    can_eff: bool,
    has_pre: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Eff {
    None,
    Del,
    Add,
}

#[derive(Debug, Clone, Copy)]
struct Choice {
    eff: Eff,
    kept: bool,
    /// `bad` is always zero here.
    rank: Completion,
}

impl SlotState {
    /// Completions still reachable: (effect, precondition kept, cost).
    fn choices(self) -> Vec<(Eff, bool, u64)> {
        if self.del {
            return vec![(Eff::Del, true, 0)];
        }
        if self.add {
            return vec![(Eff::Add, false, 0)];
        }
        if self.pre {
            let mut out = vec![(Eff::None, true, 0)];
            if self.can_pre {
                out.push((Eff::None, false, 1));
            }
            if self.can_eff {
                out.push((Eff::Del, true, 1));
                if self.can_pre {
                    out.push((Eff::Add, false, 2));
                }
            }
            out
        } else if self.can_eff {
            vec![(Eff::None, false, 0), (Eff::Add, false, 1)]
        } else {
            vec![(Eff::None, false, 0)]
        }
    }
}

/// Ranking terms of one slot value: (slots ruled out, specificity penalty).
fn rank(s: &SlotState, rule: StaticRule, prefers_delete: bool, eff: Eff, kept: bool) -> (u64, u64) {
    let mut ruled_out = 0;
    let mut penalty = 0;
    if rule.no_pre && kept {
        ruled_out += 1;
    }
    if rule.no_effect && eff != Eff::None {
        ruled_out += 1;
    }
    if s.has_pre && !kept && !rule.no_pre {
        penalty += DROPPED_PRE;
    }
    if kept && eff != Eff::Del && prefers_delete {
        penalty += KEPT_PRE;
    }
    if eff == Eff::Add {
        penalty += ADD;
    }
    (ruled_out, penalty)
}

/// Specificity penalties; each outweighs any total of the next.
const DROPPED_PRE: u64 = 1 << 14;
const KEPT_PRE: u64 = 1 << 7;
const ADD: u64 = 1;

/// Branch-and-bound nodes per component before settling for the incumbent.
const NODE_BUDGET: u64 = 200_000;

/// Best completion of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Completion {
    bad: u64,
    ruled_out: u64,
    penalty: u64,
    cost: u64,
}

impl Completion {
    const ZERO: Self = Completion {
        bad: 0,
        ruled_out: 0,
        penalty: 0,
        cost: 0,
    };
    const WORST: Self = Completion {
        bad: u64::MAX,
        ruled_out: u64::MAX,
        penalty: u64::MAX,
        cost: u64::MAX,
    };

    fn plus(self, o: Self) -> Self {
        Completion {
            bad: self.bad + o.bad,
            ruled_out: self.ruled_out + o.ruled_out,
            penalty: self.penalty + o.penalty,
            cost: self.cost + o.cost,
        }
    }

    fn minus(self, o: Self) -> Self {
        Completion {
            bad: self.bad - o.bad,
            ruled_out: self.ruled_out - o.ruled_out,
            penalty: self.penalty - o.penalty,
            cost: self.cost - o.cost,
        }
    }
}

fn eval_factor(f: &Factor, assign: &[Choice]) -> u64 {
    let mut val = f.initial;
    let mut bad = 0;
    let mut i = 0;
    while i < f.events.len() {
        let step = f.events[i].0;
        let (mut del, mut add) = (false, false);
        while i < f.events.len() && f.events[i].0 == step {
            let c = assign[f.events[i].1 as usize];
            if c.kept && !val {
                bad += 1;
            }
            del |= c.eff == Eff::Del;
            add |= c.eff == Eff::Add;
            i += 1;
        }
        if del {
            val = false;
        }
        if add {
            val = true;
        }
    }
    bad + u64::from(val != f.target)
}

struct Search<'a> {
    comp: &'a Component,
    options: Vec<Vec<Choice>>,
    /// Least ranking terms over slots `i..`.
    rest: Vec<Completion>,
    assign: Vec<Choice>,
    best: Completion,
    nodes: u64,
}

impl Search<'_> {
    fn dfs(&mut self, pos: usize, acc: Completion) {
        if pos == self.options.len() {
            self.best = self.best.min(acc);
            return;
        }
        for k in 0..self.options[pos].len() {
            if self.nodes >= NODE_BUDGET && self.best != Completion::WORST {
                return;
            }
            self.nodes += 1;
            let c = self.options[pos][k];
            self.assign[pos] = c;
            let mut next = acc.plus(c.rank);
            for &f in &self.comp.closes[pos] {
                next.bad += eval_factor(&self.comp.factors[f], &self.assign);
            }
            let bound = next.plus(self.rest[pos + 1]);
            if bound < self.best {
                self.dfs(pos + 1, next);
            }
        }
    }
}

fn solve_component(comp: &Component, key: &[SlotState]) -> Completion {
    let options: Vec<Vec<Choice>> = key
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut o: Vec<Choice> = s
                .choices()
                .into_iter()
                .map(|(eff, kept, cost)| {
                    let (ruled_out, penalty) = rank(s, comp.rules[i], comp.prefers_delete[i], eff, kept);
                    Choice {
                        eff,
                        kept,
                        rank: Completion {
                            bad: 0,
                            ruled_out,
                            penalty,
                            cost,
                        },
                    }
                })
                .collect();
            o.sort_by_key(|c| c.rank);
            o
        })
        .collect();
    let mut rest = vec![Completion::ZERO; options.len() + 1];
    for i in (0..options.len()).rev() {
        let least = Completion {
            bad: 0,
            ruled_out: options[i].iter().map(|c| c.rank.ruled_out).min().unwrap_or(0),
            penalty: options[i].iter().map(|c| c.rank.penalty).min().unwrap_or(0),
            cost: options[i].iter().map(|c| c.rank.cost).min().unwrap_or(0),
        };
        rest[i] = rest[i + 1].plus(least);
    }
    let mut search = Search {
        comp,
        assign: options.iter().map(|o| o[0]).collect(),
        options,
        rest,
        best: Completion::WORST,
        nodes: 0,
    };
    search.dfs(0, Completion::ZERO);
    search.best
}

#[derive(Debug, Clone)]
pub struct RolloutHeuristic {
    schemas: Vec<SchemaSlots>,
    components: Vec<Component>,
    /// Mismatches on atoms no slot touches; no model can repair them.
    untouched: u64,
    /// Lock fluent per (schema, slot) under symmetry breaking.
    locks: Vec<Vec<Src>>,
    can_pre: Vec<Vec<bool>>,
    can_eff: Vec<Vec<bool>>,
    /// Keyed by component and a fingerprint of its slot fluents.
    cache: HashMap<(usize, u64, u64), Completion>,
    world: Vec<Src>,
    labels: Vec<LabelRun>,
    mode_prog: Src,
    tests: Vec<Src>,
    at_step: Vec<Src>,
    scratch: Vec<bool>,
    /// Components reading each compiled-task fluent.
    readers: Vec<Vec<u32>>,
    /// Last programming-phase state evaluated, with its per-component values.
    snapshot: Option<(State, Vec<Completion>, Completion)>,
}

fn source(task: &GroundTask, init: &BTreeSet<GroundAtom>, atom: &GroundAtom) -> Src {
    match task.atom(atom) {
        Some(i) => Src::Fluent(i),
        None => Src::Const(init.contains(atom)),
    }
}

fn ground_slot(atom: &crate::pddl::Atom, args: &[String]) -> GroundAtom {
    GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => args[v[1..].parse::<usize>().expect("v-name") - 1].clone(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    }
}

impl RolloutHeuristic {
    pub fn new(compiled: &CompiledTask, task: &GroundTask) -> Result<Self, LearnError> {
        if compiled.variant != Variant::LabeledPlans {
            return Err(LearnError::Invalid("rollout guidance needs the plans variant".into()));
        }
        let plans = compiled.task.plans.as_ref().expect("plans variant has plans");
        let init = compiled.problem().init;
        let nullary = |name: String| source(task, &init, &GroundAtom::new(&name, &[]));
        let schema_names: Vec<&String> = compiled.slots.keys().collect();
        let schemas: Vec<SchemaSlots> = compiled
            .slots
            .iter()
            .map(|(s, slots)| {
                let read = |enabled: bool, name: String| if enabled { nullary(name) } else { Src::Const(false) };
                SchemaSlots {
                    pre: slots
                        .iter()
                        .map(|(a, c)| read(c.pre_fluent, CompiledTask::pre_fluent(s, a)))
                        .collect(),
                    del: slots
                        .iter()
                        .map(|(a, c)| read(c.effect_fluents, CompiledTask::del_fluent(s, a)))
                        .collect(),
                    add: slots
                        .iter()
                        .map(|(a, c)| read(c.effect_fluents, CompiledTask::add_fluent(s, a)))
                        .collect(),
                }
            })
            .collect();
        let mut world_index: HashMap<GroundAtom, u32> = HashMap::new();
        let mut world_atoms: Vec<GroundAtom> = Vec::new();
        let mut intern = |a: GroundAtom| -> u32 {
            if let Some(&i) = world_index.get(&a) {
                return i;
            }
            let i = world_atoms.len() as u32;
            world_index.insert(a.clone(), i);
            world_atoms.push(a);
            i
        };
        let mut runs = Vec::new();
        for (label, plan) in compiled.task.labels.iter().zip(plans) {
            let initial: Vec<u32> = label.initial.atoms.iter().cloned().map(&mut intern).collect();
            let target: Vec<u32> = label.final_state.atoms.iter().cloned().map(&mut intern).collect();
            let mut steps = Vec::new();
            for s in &plan.steps {
                let schema = schema_names
                    .iter()
                    .position(|n| **n == s.name)
                    .ok_or_else(|| LearnError::UnknownHeader(s.name.clone()))?;
                let atoms = compiled.slots[&s.name]
                    .keys()
                    .map(|a| intern(ground_slot(a, &s.args)))
                    .collect();
                steps.push(Step { schema, atoms });
            }
            runs.push((initial, target, steps));

        }
        let n = world_atoms.len();
        let statics = analyze_statics(&compiled.task, &compiled.hypothesis);
        let (components, untouched) = build_components(compiled, &statics, n, &runs);
        let labels = runs
            .into_iter()
            .map(|(i, t, steps)| {
                let mut initial = vec![false; n];
                let mut target = vec![false; n];
                i.into_iter().for_each(|x| initial[x as usize] = true);
                t.into_iter().for_each(|x| target[x as usize] = true);
                LabelRun { initial, target, steps }
            })
            .collect();
        let world = world_atoms.iter().map(|a| source(task, &init, a)).collect();
        let mut locks: Vec<Vec<Src>> = compiled.slots.values().map(|m| vec![Src::Const(false); m.len()]).collect();
        if compiled.symmetry_breaking {
            for (k, (schema, atom, _)) in compiled.programmable().into_iter().enumerate() {
                let si = schema_names.iter().position(|n| *n == schema).expect("known schema");
                let ai = compiled.slots[schema].keys().position(|a| a == atom).expect("known slot");
                locks[si][ai] = nullary(format!("locked_{k}"));
            }
        }
        let can_pre = compiled
            .slots
            .values()
            .map(|m| m.values().map(|c| c.pre_fluent && c.program_pre).collect())
            .collect();
        let can_eff = compiled
            .slots
            .values()
            .map(|m| m.values().map(|c| c.effect_fluents && c.program_eff).collect())
            .collect();
        let max_len = compiled.max_plan_length();
        let mut me = Self {
            schemas,
            components,
            untouched,
            locks,
            can_pre,
            can_eff,
            cache: HashMap::new(),
            world,
            labels,
            mode_prog: nullary(MODE_PROG.to_string()),
            tests: (1..=compiled.task.labels.len()).map(|t| nullary(format!("test_{t}"))).collect(),
            at_step: (1..=max_len + 1)
                .map(|j| source(task, &init, &GroundAtom::new(AT_STEP, &[&format!("i{j}")])))
                .collect(),
            scratch: vec![false; n],
            readers: Vec::new(),
            snapshot: None,
        };
        me.readers = vec![Vec::new(); task.atoms.len()];
        for (c, comp) in me.components.iter().enumerate() {
            for &(s, k) in &comp.slots {
                let slots = &me.schemas[s];
                for src in [slots.pre[k], slots.del[k], slots.add[k], me.locks[s][k]] {
                    if let Src::Fluent(i) = src {
                        let r = &mut me.readers[i as usize];
                        if r.last() != Some(&(c as u32)) {
                            r.push(c as u32);
                        }
                    }
                }
            }
        }
        Ok(me)
    }

    /// Summed completions of a programming-phase state, recomputing only
    /// components whose fluents differ from the previous call.
    fn completions(&mut self, state: &State) -> Completion {
        let (values, total) = match self.snapshot.take() {
            Some((prev, mut values, mut total)) => {
                let mut dirty: Vec<u32> = Vec::new();
                for (w, (a, b)) in prev.words().iter().zip(state.words()).enumerate() {
                    let mut diff = a ^ b;
                    while diff != 0 {
                        let bit = diff.trailing_zeros();
                        diff &= diff - 1;
                        dirty.extend(&self.readers[w * 64 + bit as usize]);
                    }
                }
                dirty.sort_unstable();
                dirty.dedup();
                for c in dirty {
                    let old = values[c as usize];
                    let new = self.complete(c as usize, state);
                    values[c as usize] = new;
                    total = total.minus(old).plus(new);
                }
                (values, total)
            }
            None => {
                let values: Vec<Completion> = (0..self.components.len()).map(|c| self.complete(c, state)).collect();
                let total = values.iter().fold(Completion::ZERO, |t, v| t.plus(*v));
                (values, total)
            }
        };
        self.snapshot = Some((state.clone(), values, total));
        total
    }

    fn slot_state(&self, state: &State, schema: usize, k: usize) -> SlotState {
        let s = &self.schemas[schema];
        let open = !self.locks[schema][k].get(state);
        SlotState {
            pre: s.pre[k].get(state),
            del: s.del[k].get(state),
            add: s.add[k].get(state),
            can_pre: open && self.can_pre[schema][k],
            can_eff: open && self.can_eff[schema][k],
            has_pre: matches!(s.pre[k], Src::Fluent(_)) || s.pre[k].get(state),
        }
    }

    /// Two independent 64-bit mixes of the slot fluents of component `c`.
    fn fingerprint(&self, c: usize, state: &State) -> (u64, u64) {
        let (mut a, mut b) = (0xcbf2_9ce4_8422_2325u64, 0x9e37_79b9_7f4a_7c15u64);
        for &(s, k) in &self.components[c].slots {
            let slots = &self.schemas[s];
            let bits = u64::from(slots.pre[k].get(state))
                | u64::from(slots.del[k].get(state)) << 1
                | u64::from(slots.add[k].get(state)) << 2
                | u64::from(self.locks[s][k].get(state)) << 3;
            a = (a ^ bits).wrapping_mul(0x0000_0100_0000_01b3);
            b = (b.rotate_left(5) ^ bits).wrapping_mul(0xff51_afd7_ed55_8ccd);
        }
        (a, b)
    }

    fn complete(&mut self, c: usize, state: &State) -> Completion {
        let (a, b) = self.fingerprint(c, state);
        if let Some(&v) = self.cache.get(&(c, a, b)) {
            return v;
        }
        let key: Vec<SlotState> = self.components[c]
            .slots
            .iter()
            .map(|&(s, k)| self.slot_state(state, s, k))
            .collect();
        let best = solve_component(&self.components[c], &key);
        self.cache.insert((c, a, b), best);
        best
    }

    /// Ranking terms of the model as it stands.
    fn fixed_rank(&self, state: &State) -> Completion {
        let mut total = Completion::ZERO;
        for comp in &self.components {
            for (i, &(s, k)) in comp.slots.iter().enumerate() {
                let slot = self.slot_state(state, s, k);
                let eff = if slot.del {
                    Eff::Del
                } else if slot.add {
                    Eff::Add
                } else {
                    Eff::None
                };
                let (ruled_out, penalty) = rank(&slot, comp.rules[i], comp.prefers_delete[i], eff, slot.pre);
                total.ruled_out += ruled_out;
                total.penalty += penalty;
            }
        }
        total
    }

    /// Violations and final mismatches of the fixed model from the current
    /// step, with the number of remaining forced steps.
    fn rollout(&mut self, state: &State, done: usize) -> (u64, u64) {
        let start_step = self.at_step.iter().position(|s| s.get(state)).unwrap_or(0);
        let model: Vec<(Vec<bool>, Vec<bool>, Vec<bool>)> = self
            .schemas
            .iter()
            .map(|s| {
                let read = |v: &Vec<Src>| v.iter().map(|x| x.get(state)).collect();
                (read(&s.pre), read(&s.del), read(&s.add))
            })
            .collect();
        let world = &mut self.scratch;
        let mut bad = 0u64;
        let mut remaining = 0u64;
        for (t, run) in self.labels.iter().enumerate().skip(done) {
            let first = if t == done { start_step } else { 0 };
            if t == done {
                for (w, src) in world.iter_mut().zip(&self.world) {
                    *w = src.get(state);
                }
            } else {
                world.copy_from_slice(&run.initial);
            }
            for step in &run.steps[first.min(run.steps.len())..] {
                let (pre, del, add) = &model[step.schema];
                for (k, &a) in step.atoms.iter().enumerate() {
                    if pre[k] && !world[a as usize] {
                        bad += 1;
                    }
                }
                for (k, &a) in step.atoms.iter().enumerate() {
                    if del[k] {
                        world[a as usize] = false;
                    }
                }
                for (k, &a) in step.atoms.iter().enumerate() {
                    if add[k] {
                        world[a as usize] = true;
                    }
                }
            }
            bad += world.iter().zip(&run.target).filter(|(a, b)| a != b).count() as u64;
            remaining += (run.steps.len().saturating_sub(first) + 1) as u64;
        }
        (bad, remaining)
    }
}

fn build_components(
    compiled: &CompiledTask,
    statics: &StaticAnalysis,
    world_size: usize,
    runs: &[(Vec<u32>, Vec<u32>, Vec<Step>)],
) -> (Vec<Component>, u64) {
    let slots: Vec<(usize, usize, StaticRule)> = compiled
        .slots
        .iter()
        .enumerate()
        .flat_map(|(si, (schema, m))| {
            m.keys().enumerate().map(move |(k, a)| {
                let rule = StaticRule {
                    no_effect: statics.is_static(&a.predicate),
                    no_pre: statics.is_forbidden(schema, a),
                };
                (si, k, rule)
            })
        })
        .collect();
    let slot_id: HashMap<(usize, usize), usize> =
        slots.iter().enumerate().map(|(i, &(s, k, _))| ((s, k), i)).collect();
    // factor per (label, world atom)
    let mut factors: Vec<(bool, bool, Vec<(u32, usize)>)> = Vec::new();
    let mut untouched = 0;
    for (initial, target, steps) in runs {
        let mut index: HashMap<u32, usize> = HashMap::new();
        let base = factors.len();
        for (i, step) in steps.iter().enumerate() {
            for (k, &a) in step.atoms.iter().enumerate() {
                let f = *index.entry(a).or_insert_with(|| {
                    factors.push((initial.contains(&a), target.contains(&a), Vec::new()));
                    factors.len() - 1
                });
                factors[f].2.push((i as u32, slot_id[&(step.schema, k)]));
            }
        }
        let mut in_initial = vec![false; world_size];
        let mut in_target = vec![false; world_size];
        initial.iter().for_each(|&a| in_initial[a as usize] = true);
        target.iter().for_each(|&a| in_target[a as usize] = true);
        untouched += (0..world_size as u32)
            .filter(|a| !index.contains_key(a) && in_initial[*a as usize] != in_target[*a as usize])
            .count() as u64;
        debug_assert!(factors[base..].iter().all(|f| !f.2.is_empty()));
    }
    // union slots sharing a factor
    let mut parent: Vec<usize> = (0..slots.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); slots.len()];
    let mut evidence = vec![false; slots.len()];
    for (_, _, events) in &factors {
        let first = events[0].1;
        for &(_, s) in events {
            evidence[s] = true;
            let (a, b) = (find(&mut parent, first), find(&mut parent, s));
            parent[a] = b;
            if s != first {
                adjacency[s].insert(first);
                adjacency[first].insert(s);
            }
        }
    }
    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for s in 0..slots.len() {
        let r = find(&mut parent, s);
        members.entry(r).or_default().push(s);
    }
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for (f, (_, _, events)) in factors.iter().enumerate() {
        by_root.entry(find(&mut parent, events[0].1)).or_default().push(f);
    }
    let components = members
        .into_iter()
        .map(|(root, group)| {
            // breadth-first order so factors close early
            let mut order: Vec<usize> = Vec::with_capacity(group.len());
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            for &start in &group {
                if !seen.insert(start) {
                    continue;
                }
                let mut queue = std::collections::VecDeque::from([start]);
                while let Some(s) = queue.pop_front() {
                    order.push(s);
                    for &n in &adjacency[s] {
                        if seen.insert(n) {
                            queue.push_back(n);
                        }
                    }
                }
            }
            let position: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let comp_factors: Vec<Factor> = by_root
                .get(&root)
                .into_iter()
                .flatten()
                .map(|&f| {
                    let (initial, target, events) = &factors[f];
                    Factor {
                        initial: *initial,
                        target: *target,
                        events: events.iter().map(|&(i, s)| (i, position[&s] as u16)).collect(),
                    }
                })
                .collect();
            let mut closes = vec![Vec::new(); order.len()];
            for (f, factor) in comp_factors.iter().enumerate() {
                let last = factor.events.iter().map(|e| e.1).max().expect("non-empty factor");
                closes[last as usize].push(f);
            }
            Component {
                slots: order.iter().map(|&s| (slots[s].0, slots[s].1)).collect(),
                prefers_delete: order.iter().map(|&s| evidence[s] && !slots[s].2.no_effect).collect(),
                rules: order.iter().map(|&s| slots[s].2).collect(),
                factors: comp_factors,
                closes,
            }
        })
        .collect();
    (components, untouched)
}

/// 10 | 6 | 24 | 10 | 14 bits: violations, ruled-out slots, penalty,
/// programming cost, plan steps left.
fn pack(bad: u64, c: Completion, steps: u64) -> u64 {
    (bad.min(0x3ff) << 54)
        | (c.ruled_out.min(0x3f) << 48)
        | (c.penalty.min(0xff_ffff) << 24)
        | (c.cost.min(0x3ff) << 14)
        | steps.min(0x3fff)
}

impl Heuristic for RolloutHeuristic {
    fn estimate(&mut self, _: &GroundTask, state: &State) -> Option<u64> {
        let done = self.tests.iter().take_while(|t| t.get(state)).count();
        if done == self.labels.len() {
            return Some(0);
        }
        if self.mode_prog.get(state) {
            let total = self.completions(state);
            let steps: u64 = self.labels.iter().map(|r| r.steps.len() as u64 + 1).sum();
            return Some(pack(self.untouched + total.bad, total, steps));
        }
        let (bad, remaining) = self.rollout(state, done);
        if bad > 0 {
            return None;
        }
        Some(pack(0, self.fixed_rank(state), remaining))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_pre() -> SlotState {
        SlotState {
            pre: true,
            del: false,
            add: false,
            can_pre: true,
            can_eff: true,
            has_pre: true,
        }
    }

    fn best(s: SlotState, rule: StaticRule) -> (Eff, bool) {
        s.choices()
            .into_iter()
            .min_by_key(|&(eff, kept, cost)| {
                let (r, p) = rank(&s, rule, false, eff, kept);
                (r, p, cost)
            })
            .map(|(eff, kept, _)| (eff, kept))
            .unwrap()
    }

    #[test]
    fn unconstrained_slot_keeps_its_precondition() {
        assert_eq!(best(open_pre(), StaticRule::default()), (Eff::None, true));
    }

    #[test]
    fn ruled_out_precondition_is_dropped_for_free() {
        let rule = StaticRule {
            no_effect: true,
            no_pre: true,
        };
        assert_eq!(best(open_pre(), rule), (Eff::None, false));
        assert_eq!(rank(&open_pre(), rule, false, Eff::None, false), (0, 0));
    }

    #[test]
    fn static_effects_outrank_any_specificity_gain() {
        let rule = StaticRule {
            no_effect: true,
            no_pre: false,
        };
        let s = open_pre();
        assert_eq!(rank(&s, rule, false, Eff::Add, false).0, 1);
        assert_eq!(rank(&s, rule, false, Eff::Del, true).0, 1);
        let completion = |(r, p): (u64, u64)| Completion {
            bad: 0,
            ruled_out: r,
            penalty: p,
            cost: 0,
        };
        // one static add never beats dropping many preconditions
        let dropped = completion((0, 100 * DROPPED_PRE));
        assert!(completion(rank(&s, rule, false, Eff::Add, false)) > dropped);
    }

    #[test]
    fn packing_keeps_field_order() {
        let c = |ruled_out, penalty, cost| Completion {
            bad: 0,
            ruled_out,
            penalty,
            cost,
        };
        assert!(pack(1, c(0, 0, 0), 0) > pack(0, c(63, 0xff_ffff, 0x3ff), 0x3fff));
        assert!(pack(0, c(1, 0, 0), 0) > pack(0, c(0, 0xff_ffff, 0x3ff), 0x3fff));
        assert!(pack(0, c(0, 1, 0), 0) > pack(0, c(0, 0, 0x3ff), 0x3fff));
        assert!(pack(0, c(0, 0, 1), 0) > pack(0, c(0, 0, 0), 0x3fff));
    }
}
