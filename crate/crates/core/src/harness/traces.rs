//! Seeded random-walk trace generation from reference domains.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::learn::{Label, Trace};
use crate::pddl::{Domain, GroundAtom, GroundState, Plan, Problem};
use crate::planner::{ground, GroundConfig, GroundTask, State};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceConfig {
    pub examples: usize,
    pub walk_min: usize,
    pub walk_max: usize,
    pub seed: u64,
    /// Redraw the whole set until every schema occurs in some plan.
    pub cover_all_schemas: bool,
    /// Walks restarted after a dead end, per trace.
    pub max_retries: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            examples: 5,
            walk_min: 8,
            walk_max: 12,
            seed: 1,
            cover_all_schemas: false,
            max_retries: 100,
        }
    }
}

struct Start {
    task: GroundTask,
    problem: Problem,
    objects: std::collections::BTreeMap<String, String>,
}

impl Start {
    fn full_state(&self, s: &State) -> GroundState {
        let mut atoms: BTreeSet<GroundAtom> = self
            .problem
            .init
            .iter()
            .filter(|a| self.task.atom(a).is_none())
            .cloned()
            .collect();
        atoms.extend(self.task.true_atoms(s).into_iter().cloned());
        GroundState { atoms }
    }
}

fn walk(start: &Start, length: usize, rng: &mut ChaCha8Rng, retries: usize) -> Result<Trace, HarnessError> {
    'attempt: for _ in 0..=retries {
        let mut state = start.task.init.clone();
        let mut ops = Vec::with_capacity(length);
        for _ in 0..length {
            let applicable: Vec<usize> = start
                .task
                .operators
                .iter()
                .enumerate()
                .filter(|(_, o)| o.applicable(&state))
                .map(|(i, _)| i)
                .collect();
            if applicable.is_empty() {
                continue 'attempt;
            }
            let pick = applicable[rng.gen_range(0..applicable.len())];
            state = start.task.operators[pick].apply(&state);
            ops.push(pick);
        }
        return Ok(Trace {
            label: Label {
                objects: start.objects.clone(),
                initial: start.full_state(&start.task.init),
                final_state: start.full_state(&state),
            },
            plan: Some(start.task.plan(&ops)),
        });
    }
    Err(HarnessError::DeadEnd {
        problem: start.problem.name.clone(),
        retries,
    })
}

fn covered(traces: &[Trace]) -> BTreeSet<&str> {
    traces
        .iter()
        .flat_map(|t| t.plan.iter().flat_map(|p: &Plan| p.steps.iter().map(|s| s.name.as_str())))
        .collect()
}

/// One trace per example, starting from the problems' initial states in
/// round-robin order. Deterministic for a fixed seed.
pub fn gen_traces(domain: &Domain, problems: &[Problem], config: &TraceConfig) -> Result<Vec<Trace>, HarnessError> {
    if config.examples == 0 {
        return Err(HarnessError::Config("example count must be at least 1".into()));
    }
    if problems.is_empty() {
        return Err(HarnessError::Config(format!("no initial states for {}", domain.name)));
    }
    if config.walk_min > config.walk_max {
        return Err(HarnessError::Config("walk length range is empty".into()));
    }
    let starts = problems
        .iter()
        .map(|p| {
            let task = ground(domain, p, &GroundConfig::default())?;
            let mut objects = domain.constants.clone();
            objects.extend(p.objects.iter().map(|(a, b)| (a.clone(), b.clone())));
            Ok(Start {
                task,
                problem: p.clone(),
                objects,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let all: BTreeSet<&str> = domain.actions.keys().map(String::as_str).collect();
    let mut best: Option<Vec<Trace>> = None;
    let rounds = if config.cover_all_schemas { 200 } else { 1 };
    for _ in 0..rounds {
        let mut traces = Vec::with_capacity(config.examples);
        for i in 0..config.examples {
            let length = rng.gen_range(config.walk_min..=config.walk_max);
            traces.push(walk(&starts[i % starts.len()], length, &mut rng, config.max_retries)?);
        }
        let n = covered(&traces).len();
        if n == all.len() {
            return Ok(traces);
        }
        if best.as_ref().is_none_or(|b| covered(b).len() < n) {
            best = Some(traces);
        }
    }
    log::warn!("{}: no trace set covered every schema", domain.name);
    Ok(best.expect("at least one round"))
}
