//! Forward state-space search: greedy best-first and breadth-first, both with
//! duplicate detection and an optional plan-length horizon.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use crate::pddl::Plan;

use super::heuristic::{GoalCountRelaxed, Heuristic};
use super::task::{GroundTask, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Gbfs,
    Bfs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Plans longer than this are not explored.
    pub horizon: Option<usize>,
    /// Run rounds with doubling horizons, starting at 8, up to `horizon`.
    pub deepening: bool,
    pub max_nodes: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Greedily drop plan steps that are not needed to reach the goal.
    pub eliminate_redundant: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Gbfs,
            horizon: None,
            deepening: false,
            max_nodes: Some(5_000_000),
            time_limit: None,
            eliminate_redundant: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    PlanFound,
    /// Every state within the horizon was explored without reaching the goal.
    Exhausted,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
    pub elapsed: Duration,
    /// Horizon of the last round; `None` when unbounded.
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub outcome: Outcome,
    pub plan: Option<Plan>,
    /// Operator indices of `plan` in the ground task.
    pub operators: Option<Vec<usize>>,
    pub stats: SearchStats,
}

impl SearchResult {
    pub fn solved(&self) -> bool {
        self.outcome == Outcome::PlanFound
    }
}

const NONE: u32 = u32::MAX;

struct Node {
    parent: u32,
    op: u32,
    g: u32,
    /// `None` for dead ends.
    h: Option<u64>,
    next_same_hash: u32,
}

struct Space {
    states: Vec<State>,
    nodes: Vec<Node>,
    heads: HashMap<u64, u32>,
}

fn state_hash(s: &State) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

impl Space {
    fn new() -> Self {
        Self {
            states: Vec::new(),
            nodes: Vec::new(),
            heads: HashMap::new(),
        }
    }

    fn find(&self, s: &State, hash: u64) -> Option<u32> {
        let mut cur = self.heads.get(&hash).copied().unwrap_or(NONE);
        while cur != NONE {
            if self.states[cur as usize] == *s {
                return Some(cur);
            }
            cur = self.nodes[cur as usize].next_same_hash;
        }
        None
    }

    fn insert(&mut self, s: State, hash: u64, parent: u32, op: u32, g: u32, h: Option<u64>) -> u32 {
        let id = self.nodes.len() as u32;
        let next = self.heads.insert(hash, id).unwrap_or(NONE);
        self.nodes.push(Node {
            parent,
            op,
            g,
            h,
            next_same_hash: next,
        });
        self.states.push(s);
        id
    }

    fn path(&self, mut id: u32) -> Vec<usize> {
        let mut ops = Vec::new();
        while self.nodes[id as usize].parent != NONE {
            ops.push(self.nodes[id as usize].op as usize);
            id = self.nodes[id as usize].parent;
        }
        ops.reverse();
        ops
    }
}

enum Round {
    Found(Vec<usize>),
    Exhausted { cutoff: bool },
    NodeLimit,
    TimeLimit,
}

struct Limits {
    start: Instant,
    time: Option<Duration>,
    nodes: Option<usize>,
}

impl Limits {
    fn timed_out(&self) -> bool {
        self.time.is_some_and(|t| self.start.elapsed() > t)
    }
}

fn gbfs(
    task: &GroundTask,
    heuristic: &mut dyn Heuristic,
    horizon: Option<usize>,
    limits: &Limits,
    stats: &mut SearchStats,
) -> Round {
    let mut space = Space::new();
    let init = task.init.clone();
    if task.is_goal(&init) {
        return Round::Found(Vec::new());
    }
    let h0 = heuristic.estimate(task, &init);
    let hash = state_hash(&init);
    space.insert(init, hash, NONE, NONE, 0, h0);
    let Some(h0) = h0 else {
        return Round::Exhausted { cutoff: false };
    };
    let mut open: BinaryHeap<Reverse<(u64, u64, u32, u32)>> = BinaryHeap::new();
    let mut seq: u64 = 0;
    open.push(Reverse((h0, seq, 0, 0)));
    let mut cutoff = false;
    while let Some(Reverse((_, _, id, g))) = open.pop() {
        if space.nodes[id as usize].g != g {
            continue;
        }
        if horizon.is_some_and(|hz| g as usize >= hz) {
            cutoff = true;
            continue;
        }
        stats.expanded += 1;
        if stats.expanded % 256 == 0 && limits.timed_out() {
            return Round::TimeLimit;
        }
        let state = space.states[id as usize].clone();
        for (oi, op) in task.operators.iter().enumerate() {
            if !op.applicable(&state) {
                continue;
            }
            let next = op.apply(&state);
            stats.generated += 1;
            let ng = g + 1;
            let hash = state_hash(&next);
            match space.find(&next, hash) {
                Some(existing) => {
                    let node = &mut space.nodes[existing as usize];
                    if node.g > ng {
                        node.g = ng;
                        node.parent = id;
                        node.op = oi as u32;
                        if let Some(h) = node.h {
                            seq += 1;
                            open.push(Reverse((h, seq, existing, ng)));
                        }
                    }
                }
                None => {
                    let goal = task.is_goal(&next);
                    let h = if goal { Some(0) } else { heuristic.estimate(task, &next) };
                    let nid = space.insert(next, hash, id, oi as u32, ng, h);
                    if goal {
                        return Round::Found(space.path(nid));
                    }
                    if limits.nodes.is_some_and(|n| space.nodes.len() >= n) {
                        return Round::NodeLimit;
                    }
                    if let Some(h) = h {
                        seq += 1;
                        open.push(Reverse((h, seq, nid, ng)));
                    }
                }
            }
        }
    }
    Round::Exhausted { cutoff }
}

fn bfs(task: &GroundTask, horizon: Option<usize>, limits: &Limits, stats: &mut SearchStats) -> Round {
    let mut space = Space::new();
    let init = task.init.clone();
    if task.is_goal(&init) {
        return Round::Found(Vec::new());
    }
    let hash = state_hash(&init);
    space.insert(init, hash, NONE, NONE, 0, Some(0));
    let mut queue = VecDeque::from([0u32]);
    let mut cutoff = false;
    while let Some(id) = queue.pop_front() {
        let g = space.nodes[id as usize].g;
        if horizon.is_some_and(|hz| g as usize >= hz) {
            cutoff = true;
            continue;
        }
        stats.expanded += 1;
        if stats.expanded % 256 == 0 && limits.timed_out() {
            return Round::TimeLimit;
        }
        let state = space.states[id as usize].clone();
        for (oi, op) in task.operators.iter().enumerate() {
            if !op.applicable(&state) {
                continue;
            }
            let next = op.apply(&state);
            stats.generated += 1;
            let hash = state_hash(&next);
            if space.find(&next, hash).is_some() {
                continue;
            }
            let goal = task.is_goal(&next);
            let nid = space.insert(next, hash, id, oi as u32, g + 1, Some(0));
            if goal {
                return Round::Found(space.path(nid));
            }
            if limits.nodes.is_some_and(|n| space.nodes.len() >= n) {
                return Round::NodeLimit;
            }
            queue.push_back(nid);
        }
    }
    Round::Exhausted { cutoff }
}

/// Solves with the default evaluator: goal count with a relaxed tie-breaker.
pub fn solve(task: &GroundTask, config: &SearchConfig) -> SearchResult {
    solve_with(task, config, &mut GoalCountRelaxed::default())
}

pub fn solve_with(task: &GroundTask, config: &SearchConfig, heuristic: &mut dyn Heuristic) -> SearchResult {
    let limits = Limits {
        start: Instant::now(),
        time: config.time_limit,
        nodes: config.max_nodes,
    };
    let mut stats = SearchStats::default();
    let mut horizon = if config.deepening {
        Some(config.horizon.map_or(8, |h| h.min(8)))
    } else {
        config.horizon
    };
    let finish = |outcome, ops: Option<Vec<usize>>, mut stats: SearchStats, horizon| {
        stats.elapsed = limits.start.elapsed();
        stats.horizon = horizon;
        SearchResult {
            outcome,
            plan: ops.as_ref().map(|o| task.plan(o)),
            operators: ops,
            stats,
        }
    };
    loop {
        let round = match config.algorithm {
            Algorithm::Gbfs => gbfs(task, heuristic, horizon, &limits, &mut stats),
            Algorithm::Bfs => bfs(task, horizon, &limits, &mut stats),
        };
        match round {
            Round::Found(mut ops) => {
                debug_assert!(task.is_solution(&ops));
                if config.eliminate_redundant {
                    ops = eliminate_redundant(task, &ops);
                }
                return finish(Outcome::PlanFound, Some(ops), stats, horizon);
            }
            Round::NodeLimit => return finish(Outcome::NodeLimit, None, stats, horizon),
            Round::TimeLimit => return finish(Outcome::TimeLimit, None, stats, horizon),
            Round::Exhausted { cutoff } => {
                let next = match horizon {
                    Some(h) if cutoff && config.deepening && config.horizon.is_none_or(|max| h < max) => {
                        let doubled = h * 2;
                        Some(config.horizon.map_or(doubled, |max| doubled.min(max)))
                    }
                    _ => None,
                };
                match next {
                    Some(h) => horizon = Some(h),
                    None => return finish(Outcome::Exhausted, None, stats, horizon),
                }
            }
        }
    }
}

/// Repeatedly removes single steps whose removal keeps the plan a solution,
/// scanning front to back until no step can be dropped.
pub fn eliminate_redundant(task: &GroundTask, ops: &[usize]) -> Vec<usize> {
    eliminate_redundant_except(task, ops, &vec![false; ops.len()])
}

/// [`eliminate_redundant`] that never drops the steps flagged in `pinned`.
pub fn eliminate_redundant_except(task: &GroundTask, ops: &[usize], pinned: &[bool]) -> Vec<usize> {
    let mut plan: Vec<(usize, bool)> = ops.iter().copied().zip(pinned.iter().copied()).collect();
    let bare = |p: &[(usize, bool)]| p.iter().map(|x| x.0).collect::<Vec<_>>();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < plan.len() {
            if plan[i].1 {
                i += 1;
                continue;
            }
            let mut shorter = plan.clone();
            shorter.remove(i);
            if task.is_solution(&bare(&shorter)) {
                plan = shorter;
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            return bare(&plan);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    const CHAIN: &str = "(define (domain chain) (:predicates (at ?x) (link ?x ?y) (visited ?x))
        (:action move :parameters (?x ?y) :precondition (and (at ?x) (link ?x ?y))
         :effect (and (at ?y) (visited ?y) (not (at ?x)))))";

    fn chain(goal: &str) -> GroundTask {
        let d = parse_domain(CHAIN).unwrap();
        let p = parse_problem(&format!(
            "(define (problem c) (:domain chain) (:objects n1 n2 n3 n4 n5)
               (:init (at n1) (link n1 n2) (link n2 n3) (link n3 n4) (link n2 n4) (link n4 n2))
               (:goal {goal}))"
        ))
        .unwrap();
        crate::planner::ground_default(&d, &p).unwrap()
    }

    #[test]
    fn goal_at_init_gives_empty_plan() {
        let r = solve(&chain("(at n1)"), &SearchConfig::default());
        assert!(r.solved());
        assert!(r.plan.unwrap().is_empty());
    }

    #[test]
    fn bfs_plans_are_shortest_and_replay() {
        let task = chain("(and (at n4) (visited n3))");
        let config = SearchConfig {
            algorithm: Algorithm::Bfs,
            ..SearchConfig::default()
        };
        let r = solve(&task, &config);
        let ops = r.operators.unwrap();
        assert!(task.is_solution(&ops));
        assert_eq!(ops.len(), 3);
        let g = solve(&task, &SearchConfig::default());
        assert!(task.is_solution(&g.operators.unwrap()));
    }

    #[test]
    fn unreachable_goal_is_exhausted_for_both_algorithms() {
        let task = chain("(at n5)");
        for algorithm in [Algorithm::Gbfs, Algorithm::Bfs] {
            let r = solve(
                &task,
                &SearchConfig {
                    algorithm,
                    ..SearchConfig::default()
                },
            );
            assert_eq!(r.outcome, Outcome::Exhausted);
            assert!(r.plan.is_none());
        }
    }

    #[test]
    fn horizon_cuts_off_longer_plans() {
        let task = chain("(and (at n4) (visited n3))");
        let short = SearchConfig {
            algorithm: Algorithm::Bfs,
            horizon: Some(2),
            ..SearchConfig::default()
        };
        assert_eq!(solve(&task, &short).outcome, Outcome::Exhausted);
        let deepening = SearchConfig {
            deepening: true,
            horizon: Some(2),
            ..SearchConfig::default()
        };
        let r = solve(&task, &deepening);
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.stats.horizon, Some(2));
        let open = SearchConfig {
            deepening: true,
            ..SearchConfig::default()
        };
        assert!(solve(&task, &open).solved());
    }

    #[test]
    fn node_limit_is_reported() {
        let task = chain("(at n5)");
        let r = solve(
            &task,
            &SearchConfig {
                max_nodes: Some(2),
                ..SearchConfig::default()
            },
        );
        assert_eq!(r.outcome, Outcome::NodeLimit);
    }

    #[test]
    fn search_is_repeatable() {
        let task = chain("(and (at n2) (visited n4))");
        let a = solve(&task, &SearchConfig::default());
        let b = solve(&task, &SearchConfig::default());
        assert_eq!(a.plan, b.plan);
        assert_eq!(a.stats.expanded, b.stats.expanded);
    }

    #[test]
    fn redundant_steps_are_dropped_unless_pinned() {
        let task = chain("(visited n2)");
        let idx = |name: &str| task.operators.iter().position(|o| o.to_string() == name).unwrap();
        let ops = vec![idx("(move n1 n2)"), idx("(move n2 n4)"), idx("(move n4 n2)")];
        assert!(task.is_solution(&ops));
        assert_eq!(eliminate_redundant(&task, &ops), vec![ops[0]]);
        assert_eq!(eliminate_redundant_except(&task, &ops, &[false, true, false]), vec![ops[0], ops[1]]);
    }
}
