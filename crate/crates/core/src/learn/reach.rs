//! Search guidance for the labels-only variant. The model encoded in the slot
//! fluents is executed by breadth-first search from each remaining label's
//! initial state; the estimate combines the closest approach to each final
//! state with the distance to it. After programming, an exhaustively
//! explored label that cannot be completed marks a dead end.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::pddl::{GroundAtom, Term};
use crate::planner::{GroundTask, Heuristic, State};

use super::compile::{CompiledTask, Variant, MODE_PROG};
use super::hypothesis::index_tuples;
use super::LearnError;

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

fn source(task: &GroundTask, init: &BTreeSet<GroundAtom>, atom: &GroundAtom) -> Src {
    match task.atom(atom) {
        Some(i) => Src::Fluent(i),
        None => Src::Const(init.contains(atom)),
    }
}

/// A ground instance of a schema: world-atom index per slot.
#[derive(Debug, Clone)]
struct Binding {
    schema: usize,
    atoms: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    /// Smallest symmetric difference to the final state among reached states.
    mismatch: u64,
    /// Steps to the final state when it was reached.
    distance: u64,
    /// Every reachable state was visited.
    exhaustive: bool,
}

/// Caps the states explored per label and evaluation.
pub const DEFAULT_STATE_LIMIT: usize = 20_000;
/// Cap while programming, where probes only rank models and never prune.
const PROGRAMMING_STATE_LIMIT: usize = 2_000;
/// Mismatch charged to states of a fixed model whose closure overflowed
/// without reaching the final state; above any real mismatch.
const UNPROMISING: u64 = 1 << 24;
/// Closures kept for fixed models; the cache is flushed when full.
const CLOSURE_CACHE: usize = 8;

/// The states a fixed model reaches from a label's initial state.
#[derive(Debug, Clone)]
struct Closure {
    index: HashMap<Vec<u64>, u32>,
    /// Steps to the final state; `u64::MAX` where it is unreachable.
    dist: Vec<u64>,
    mismatch: u64,
    exhaustive: bool,
}

#[derive(Debug, Clone)]
pub struct ReachabilityHeuristic {
    /// Per schema: pre, del and add sources, one per slot.
    slots: Vec<[Vec<Src>; 3]>,
    bindings: Vec<Binding>,
    world: Vec<Src>,
    initial: Vec<Vec<u64>>,
    target: Vec<Vec<u64>>,
    mode_prog: Src,
    tests: Vec<Src>,
    state_limit: usize,
    cache: HashMap<(Vec<u64>, usize), Probe>,
    closures: HashMap<(Vec<u64>, usize), Closure>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn set(bits: &mut [u64], i: u32, v: bool) {
    let w = &mut bits[(i / 64) as usize];
    if v {
        *w |= 1 << (i % 64);
    } else {
        *w &= !(1 << (i % 64));
    }
}

fn get(bits: &[u64], i: u32) -> bool {
    bits[(i / 64) as usize] >> (i % 64) & 1 == 1
}

impl ReachabilityHeuristic {
    pub fn new(compiled: &CompiledTask, task: &GroundTask) -> Result<Self, LearnError> {
        Self::with_limit(compiled, task, DEFAULT_STATE_LIMIT)
    }

    pub fn with_limit(compiled: &CompiledTask, task: &GroundTask, state_limit: usize) -> Result<Self, LearnError> {
        if compiled.variant != Variant::Labels {
            return Err(LearnError::Invalid("reachability guidance is for the labels-only variant".into()));
        }
        let init = compiled.problem().init;
        let nullary = |name: String| source(task, &init, &GroundAtom::new(&name, &[]));
        let slots = compiled
            .slots
            .iter()
            .map(|(s, m)| {
                let read = |on: bool, name: String| if on { nullary(name) } else { Src::Const(false) };
                [
                    m.iter().map(|(a, c)| read(c.pre_fluent, CompiledTask::pre_fluent(s, a))).collect(),
                    m.iter().map(|(a, c)| read(c.effect_fluents, CompiledTask::del_fluent(s, a))).collect(),
                    m.iter().map(|(a, c)| read(c.effect_fluents, CompiledTask::add_fluent(s, a))).collect(),
                ]
            })
            .collect();
        let objects = compiled.objects();
        let types = &compiled.task.types;
        let mut index: HashMap<GroundAtom, u32> = HashMap::new();
        let mut atoms: Vec<GroundAtom> = Vec::new();
        let mut intern = |a: GroundAtom| -> u32 {
            *index.entry(a.clone()).or_insert_with(|| {
                atoms.push(a);
                atoms.len() as u32 - 1
            })
        };
        let mut bindings = Vec::new();
        for (si, (schema, m)) in compiled.slots.iter().enumerate() {
            let header = compiled.task.header(schema).expect("slots follow headers");
            let choices: Vec<Vec<&String>> = header
                .param_types
                .iter()
                .map(|ty| objects.iter().filter(|(_, t)| types.is_subtype(t, ty)).map(|(o, _)| o).collect())
                .collect();
            let width = choices.iter().map(Vec::len).max().unwrap_or(0);
            for idx in index_tuples(width, header.arity()) {
                if idx.iter().zip(&choices).any(|(&i, c)| i >= c.len()) {
                    continue;
                }
                let args: Vec<&String> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
                let slot_atoms = m
                    .keys()
                    .map(|a| {
                        intern(GroundAtom {
                            predicate: a.predicate.clone(),
                            args: a
                                .args
                                .iter()
                                .map(|t| match t {
                                    Term::Var(v) => args[v[1..].parse::<usize>().expect("v-name") - 1].clone(),
                                    Term::Const(c) => c.clone(),
                                })
                                .collect(),
                        })
                    })
                    .collect();
                bindings.push(Binding {
                    schema: si,
                    atoms: slot_atoms,
                });
            }
        }
        for l in &compiled.task.labels {
            for a in l.initial.atoms.iter().chain(&l.final_state.atoms) {
                intern(a.clone());
            }
        }
        let n = atoms.len();
        let to_bits = |s: &BTreeSet<GroundAtom>| {
            let mut b = vec![0u64; words(n)];
            for a in s {
                set(&mut b, index[a], true);
            }
            b
        };
        let initial = compiled.task.labels.iter().map(|l| to_bits(&l.initial.atoms)).collect();
        let target = compiled.task.labels.iter().map(|l| to_bits(&l.final_state.atoms)).collect();
        let world = atoms.iter().map(|a| source(task, &init, a)).collect();
        Ok(Self {
            slots,
            bindings,
            world,
            initial,
            target,
            mode_prog: nullary(MODE_PROG.to_string()),
            tests: (1..=compiled.task.labels.len()).map(|t| nullary(format!("test_{t}"))).collect(),
            state_limit,
            cache: HashMap::new(),
            closures: HashMap::new(),
        })
    }

    fn model(&self, state: &State) -> Vec<u64> {
        let mut bits = Vec::new();
        let mut k = 0u32;
        for kinds in &self.slots {
            for kind in kinds {
                for src in kind {
                    if bits.len() <= (k / 64) as usize {
                        bits.push(0);
                    }
                    set(&mut bits, k, src.get(state));
                    k += 1;
                }
            }
        }
        bits
    }

    fn slot_values(&self, state: &State) -> Vec<[Vec<bool>; 3]> {
        self.slots
            .iter()
            .map(|kinds| {
                [
                    kinds[0].iter().map(|s| s.get(state)).collect(),
                    kinds[1].iter().map(|s| s.get(state)).collect(),
                    kinds[2].iter().map(|s| s.get(state)).collect(),
                ]
            })
            .collect()
    }

    /// Calls `f` with each state one model step away from `w`; stops when
    /// `f` returns false.
    fn successors(&self, model: &[[Vec<bool>; 3]], w: &[u64], mut f: impl FnMut(Vec<u64>) -> bool) {
        for b in &self.bindings {
            let [pre, del, add] = &model[b.schema];
            if !b.atoms.iter().zip(pre).all(|(&a, &p)| !p || get(w, a)) {
                continue;
            }
            let mut next = w.to_vec();
            for (&a, &d) in b.atoms.iter().zip(del) {
                if d {
                    set(&mut next, a, false);
                }
            }
            for (&a, &ad) in b.atoms.iter().zip(add) {
                if ad {
                    set(&mut next, a, true);
                }
            }
            if !f(next) {
                return;
            }
        }
    }

    fn mismatch(&self, w: &[u64], t: usize) -> u64 {
        w.iter().zip(&self.target[t]).map(|(a, b)| (a ^ b).count_ones() as u64).sum()
    }

    /// Breadth-first search that stops at the final state.
    fn probe(&self, state: &State, start: Vec<u64>, t: usize, limit: usize) -> Probe {
        let model = self.slot_values(state);
        let mut best = self.mismatch(&start, t);
        if best == 0 {
            return Probe {
                mismatch: 0,
                distance: 0,
                exhaustive: true,
            };
        }
        let mut seen: HashMap<Vec<u64>, u64> = HashMap::new();
        seen.insert(start.clone(), 0);
        let mut queue = VecDeque::from([start]);
        let mut found = None;
        let mut truncated = false;
        while let Some(w) = queue.pop_front() {
            let g = seen[&w];
            self.successors(&model, &w, |next| {
                if seen.contains_key(&next) {
                    return true;
                }
                let d = self.mismatch(&next, t);
                if d == 0 {
                    found = Some(g + 1);
                    return false;
                }
                best = best.min(d);
                if seen.len() >= limit {
                    truncated = true;
                    return false;
                }
                seen.insert(next.clone(), g + 1);
                queue.push_back(next);
                true
            });
            if let Some(distance) = found {
                return Probe {
                    mismatch: 0,
                    distance,
                    exhaustive: true,
                };
            }
            if truncated {
                break;
            }
        }
        Probe {
            mismatch: best,
            distance: 0,
            exhaustive: !truncated,
        }
    }

    /// Everything the fixed model reaches from label `t`'s initial state, with
    /// exact distances to its final state.
    fn closure(&self, state: &State, t: usize) -> Closure {
        let model = self.slot_values(state);
        let start = self.initial[t].clone();
        let mut index: HashMap<Vec<u64>, u32> = HashMap::from([(start.clone(), 0)]);
        let mut states = vec![start];
        let mut preds: Vec<Vec<u32>> = vec![Vec::new()];
        let mut truncated = false;
        let mut k = 0;
        while k < states.len() && !truncated {
            let w = states[k].clone();
            self.successors(&model, &w, |next| {
                let j = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= self.state_limit {
                            truncated = true;
                            return false;
                        }
                        let j = states.len() as u32;
                        index.insert(next.clone(), j);
                        states.push(next);
                        preds.push(Vec::new());
                        j
                    }
                };
                preds[j as usize].push(k as u32);
                true
            });
            k += 1;
        }
        let mut dist = vec![u64::MAX; states.len()];
        let mut queue = VecDeque::new();
        let mut best = u64::MAX;
        for (j, w) in states.iter().enumerate() {
            let d = self.mismatch(w, t);
            best = best.min(d);
            if d == 0 {
                dist[j] = 0;
                queue.push_back(j);
            }
        }
        while let Some(j) = queue.pop_front() {
            for &p in &preds[j] {
                if dist[p as usize] == u64::MAX {
                    dist[p as usize] = dist[j] + 1;
                    queue.push_back(p as usize);
                }
            }
        }
        Closure {
            index,
            dist,
            mismatch: best,
            exhaustive: !truncated,
        }
    }

    /// Probe for the fixed model from world state `w` of label `t`. Every
    /// such `w` was reached from the label's initial state by the model, so
    /// an exhaustive closure contains it.
    fn fixed_probe(&mut self, state: &State, model: &[u64], t: usize, w: Vec<u64>) -> Probe {
        let key = (model.to_vec(), t);
        if !self.closures.contains_key(&key) {
            if self.closures.len() >= CLOSURE_CACHE {
                self.closures.clear();
            }
            let c = self.closure(state, t);
            self.closures.insert(key.clone(), c);
        }
        let c = &self.closures[&key];
        match c.index.get(&w) {
            Some(&j) if c.dist[j as usize] != u64::MAX => Probe {
                mismatch: 0,
                distance: c.dist[j as usize],
                exhaustive: true,
            },
            Some(_) if c.exhaustive => Probe {
                mismatch: c.mismatch.max(1),
                distance: 0,
                exhaustive: true,
            },
            // the model wanders beyond the cap without reaching the final
            // state: explore it only after every alternative model
            _ => Probe {
                mismatch: UNPROMISING,
                distance: 0,
                exhaustive: false,
            },
        }
    }
}

impl Heuristic for ReachabilityHeuristic {
    fn estimate(&mut self, _: &GroundTask, state: &State) -> Option<u64> {
        let done = self.tests.iter().take_while(|t| t.get(state)).count();
        let tau = self.tests.len();
        if done == tau {
            return Some(0);
        }
        let programming = self.mode_prog.get(state);
        let model = self.model(state);
        let mut mismatch = 0u64;
        let mut distance = (tau - done) as u64;
        for t in done..tau {
            let probe = if programming {
                if let Some(p) = self.cache.get(&(model.clone(), t)) {
                    *p
                } else {
                    let limit = PROGRAMMING_STATE_LIMIT.min(self.state_limit);
                    let p = self.probe(state, self.initial[t].clone(), t, limit);
                    self.cache.insert((model.clone(), t), p);
                    p
                }
            } else {
                let w = if t == done {
                    let mut w = vec![0u64; self.initial[t].len()];
                    for (i, src) in self.world.iter().enumerate() {
                        set(&mut w, i as u32, src.get(state));
                    }
                    w
                } else {
                    self.initial[t].clone()
                };
                self.fixed_probe(state, &model, t, w)
            };
            if !programming && probe.exhaustive && probe.mismatch > 0 {
                return None;
            }
            mismatch += probe.mismatch;
            distance += probe.distance;
        }
        Some((mismatch << 32) | distance.min(u32::MAX as u64))
    }
}
