//! Checking a model against a learning task, independently of the
//! compilation, and through it.

use std::collections::BTreeSet;

use crate::learn::{compile_lambda_prime, CompileOptions, KnownSchema, LearningTask, PartialModel};
use crate::pddl::{
    replay, GroundAtom, GroundLiteral, GroundState, OperatorSchema, Problem, Replay,
};
use crate::planner::{ground, solve, GroundConfig, Outcome, SearchConfig};

use super::{schemas_to_domain, ModelError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// Plan step (zero-based) that is not applicable under the model.
    Inapplicable { step: usize, action: String },
    FinalMismatch {
        missing: Vec<GroundAtom>,
        unexpected: Vec<GroundAtom>,
    },
    /// Labels only: no plan reaches the final state.
    Unreachable,
    /// Labels only: the search hit a resource limit.
    Undecided(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        *self == Verdict::Valid
    }
}

fn mismatch(reached: &GroundState, expected: &GroundState) -> Verdict {
    let missing: Vec<GroundAtom> = expected.atoms.difference(&reached.atoms).cloned().collect();
    let unexpected: Vec<GroundAtom> = reached.atoms.difference(&expected.atoms).cloned().collect();
    if missing.is_empty() && unexpected.is_empty() {
        Verdict::Valid
    } else {
        Verdict::FinalMismatch { missing, unexpected }
    }
}

/// Typed atoms over `objects` for the task's predicates.
fn universe(task: &LearningTask, objects: &std::collections::BTreeMap<String, String>) -> Vec<GroundAtom> {
    let mut out = Vec::new();
    for sig in task.predicates.values() {
        let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
        for ty in &sig.param_types {
            let fit: Vec<&String> = objects
                .iter()
                .filter(|(_, t)| task.types.is_subtype(t, ty))
                .map(|(o, _)| o)
                .collect();
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    fit.iter().map(move |o| {
                        let mut t = t.clone();
                        t.push((*o).clone());
                        t
                    })
                })
                .collect();
        }
        out.extend(tuples.into_iter().map(|args| GroundAtom {
            predicate: sig.name.clone(),
            args,
        }));
    }
    out
}

/// One verdict per example. With plans, each plan is replayed from its initial
/// state and must end exactly in the final state. Without plans, a planner
/// searches the model's ground actions for a path to the exact final state.
pub fn validate_by_replay(
    model: &[OperatorSchema],
    task: &LearningTask,
    search: &SearchConfig,
) -> Result<Vec<Verdict>, ModelError> {
    let mut out = Vec::new();
    for (t, label) in task.labels.iter().enumerate() {
        let verdict = match task.plans.as_ref().map(|p| &p[t]) {
            Some(plan) => match replay(&label.initial, plan, model)? {
                Replay::Failed { index, .. } => Verdict::Inapplicable {
                    step: index,
                    action: plan.steps[index].to_string(),
                },
                Replay::Completed { trace } => mismatch(trace.last().expect("non-empty"), &label.final_state),
            },
            None => {
                let domain = schemas_to_domain(model, task);
                let mut problem = Problem::new(&format!("label-{}", t + 1), &domain.name);
                problem.objects = label.objects.clone();
                problem.init = label.initial.atoms.clone();
                let target: BTreeSet<&GroundAtom> = label.final_state.atoms.iter().collect();
                for a in universe(task, &label.objects) {
                    let positive = target.contains(&a);
                    problem.goal.insert(if positive {
                        GroundLiteral::pos(a)
                    } else {
                        GroundLiteral::neg(a)
                    });
                }
                let gt = ground(&domain, &problem, &GroundConfig::default())?;
                let r = solve(&gt, search);
                match r.outcome {
                    Outcome::PlanFound => Verdict::Valid,
                    Outcome::Exhausted if search.horizon.is_none() => Verdict::Unreachable,
                    o => Verdict::Undecided(format!("{o:?}")),
                }
            }
        };
        out.push(verdict);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompiledVerdict {
    Valid,
    /// No solution within the horizon bound of the compiled task.
    Invalid { horizon: usize },
    Undecided(Outcome),
}

/// Validates through the plans compilation with every schema given as
/// complete; the model is invalid when the compiled task has no solution
/// within its plan-length bound.
pub fn validate_by_compilation(
    model: &[OperatorSchema],
    task: &LearningTask,
    search: &SearchConfig,
) -> Result<CompiledVerdict, ModelError> {
    let pm: PartialModel = model
        .iter()
        .map(|s| (s.name.clone(), KnownSchema::from_schema(s, true)))
        .collect();
    let mut t = task.clone();
    t.partial_model = Some(pm);
    let compiled = compile_lambda_prime(&t, CompileOptions::default())?;
    let horizon = compiled.plan_length_bound();
    let gt = ground(&compiled.domain(), &compiled.problem(), &GroundConfig::default())?;
    let config = SearchConfig {
        horizon: Some(horizon),
        ..search.clone()
    };
    let r = solve(&gt, &config);
    Ok(match r.outcome {
        Outcome::PlanFound => CompiledVerdict::Valid,
        Outcome::Exhausted => CompiledVerdict::Invalid { horizon },
        o => CompiledVerdict::Undecided(o),
    })
}
