//! State evaluators for best-first search. `None` marks a proven dead end.

use super::task::{Condition, GroundTask, State};

pub trait Heuristic {
    fn estimate(&mut self, task: &GroundTask, state: &State) -> Option<u64>;
}

/// Zero everywhere; turns best-first search into uniform exploration.
#[derive(Debug, Default, Clone, Copy)]
pub struct Blind;

impl Heuristic for Blind {
    fn estimate(&mut self, _: &GroundTask, _: &State) -> Option<u64> {
        Some(0)
    }
}

/// Number of unsatisfied goal literals.
#[derive(Debug, Default, Clone, Copy)]
pub struct GoalCount;

impl Heuristic for GoalCount {
    fn estimate(&mut self, task: &GroundTask, state: &State) -> Option<u64> {
        Some(task.goal.iter().filter(|l| !l.holds(state)).count() as u64)
    }
}

const INF: u64 = u64::MAX / 4;

/// Additive cost in the delete relaxation where negative literals are free.
/// Infinite cost proves the goal unreachable.
#[derive(Debug, Default, Clone)]
pub struct RelaxedAdd {
    cost: Vec<u64>,
}

impl RelaxedAdd {
    pub fn value(&mut self, task: &GroundTask, state: &State) -> u64 {
        let n = task.atoms.len();
        self.cost.clear();
        self.cost
            .extend((0..n as u32).map(|i| if state.get(i) { 0 } else { INF }));
        let cost = &mut self.cost;
        let lit_cost = |cost: &[u64], atom: u32, positive: bool| if positive { cost[atom as usize] } else { 0 };
        loop {
            let mut changed = false;
            for op in &task.operators {
                let mut c: u64 = 1;
                for p in &op.pre {
                    let x = match *p {
                        Condition::Lit(l) => lit_cost(cost, l.atom, l.positive),
                        Condition::Or(a, b) => lit_cost(cost, a.atom, a.positive).min(lit_cost(cost, b.atom, b.positive)),
                    };
                    c = (c + x).min(INF);
                }
                if c >= INF {
                    continue;
                }
                for e in &op.effects {
                    let mut ce = c;
                    for l in &e.condition {
                        ce = (ce + lit_cost(cost, l.atom, l.positive)).min(INF);
                    }
                    if ce >= INF {
                        continue;
                    }
                    for &a in &e.add {
                        if ce < cost[a as usize] {
                            cost[a as usize] = ce;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut total: u64 = 0;
        for g in &task.goal {
            if g.positive {
                total = (total + cost[g.atom as usize]).min(INF);
            }
        }
        total
    }
}

impl Heuristic for RelaxedAdd {
    fn estimate(&mut self, task: &GroundTask, state: &State) -> Option<u64> {
        let v = self.value(task, state);
        (v < INF).then_some(v)
    }
}

/// Goal count, ties broken by the relaxed additive cost, which also detects dead ends.
#[derive(Debug, Default, Clone)]
pub struct GoalCountRelaxed {
    relaxed: RelaxedAdd,
}

impl Heuristic for GoalCountRelaxed {
    fn estimate(&mut self, task: &GroundTask, state: &State) -> Option<u64> {
        let r = self.relaxed.estimate(task, state)?;
        let gc = GoalCount.estimate(task, state)?;
        Some((gc << 32) | r.min(u32::MAX as u64))
    }
}
