//! Reading an action model off a solution of a compiled task.

use std::collections::BTreeMap;

use crate::learn::compile::MODE_PROG;
use crate::learn::{CompiledTask, SlotKind};
use crate::pddl::{replay_actions, variable_name, GroundAtom, GroundState, OperatorSchema, Param, Plan, Replay};

use super::{LearnedModel, ModelError, SlotOrigin};

/// Simulates `plan` on `compiled` and reads the slot fluents at the moment
/// programming ends.
pub fn decode(plan: &Plan, compiled: &CompiledTask) -> Result<LearnedModel, ModelError> {
    let domain = compiled.domain();
    let problem = compiled.problem();
    let init = GroundState::new(problem.init.iter().cloned());
    let trace = match replay_actions(&init, plan, &domain.actions)? {
        Replay::Completed { trace } => trace,
        Replay::Failed { index, .. } => {
            return Err(ModelError::PlanReplay(format!("step {} ({}) is not applicable", index + 1, plan.steps[index])))
        }
    };
    let last = trace.last().expect("non-empty");
    if let Some(g) = problem.goal.iter().find(|g| !last.holds(g)) {
        return Err(ModelError::PlanReplay(format!("goal literal {g} does not hold")));
    }
    let mode = GroundAtom::new(MODE_PROG, &[]);
    let switch = trace.iter().position(|s| !s.contains(&mode)).unwrap_or(trace.len() - 1);
    let state = &trace[switch];
    let programmed: Vec<&str> = plan.steps[..switch].iter().map(|s| s.name.as_str()).collect();

    let mut schemas: BTreeMap<String, OperatorSchema> = compiled
        .task
        .headers
        .iter()
        .map(|h| {
            let params = h
                .param_types
                .iter()
                .enumerate()
                .map(|(i, ty)| Param::new(&variable_name(i), ty))
                .collect();
            (h.name.clone(), OperatorSchema::new(&h.name, params))
        })
        .collect();
    for e in compiled.decode_table() {
        let schema = schemas
            .get_mut(&e.schema)
            .ok_or_else(|| ModelError::DecodeTable(format!("unknown schema {}", e.schema)))?;
        if !domain.predicates.contains_key(&e.fluent) {
            return Err(ModelError::DecodeTable(format!("missing fluent {}", e.fluent)));
        }
        if state.contains(&GroundAtom::new(&e.fluent, &[])) {
            match e.kind {
                SlotKind::Pre => schema.pre.insert(e.atom.clone()),
                SlotKind::Del => schema.del.insert(e.atom.clone()),
                SlotKind::Add => schema.add.insert(e.atom.clone()),
            };
        }
    }
    for s in schemas.values() {
        if let Some(v) = s.violations().first() {
            return Err(ModelError::IllFormed {
                schema: s.name.clone(),
                detail: format!("{v:?}"),
            });
        }
    }

    let mut provenance = BTreeMap::new();
    for (schema, slots) in &compiled.slots {
        for (atom, cfg) in slots {
            let suffix = &CompiledTask::pre_fluent(schema, atom)[4..];
            let pre_action = format!("program_pre_{suffix}");
            let eff_action = format!("program_eff_{suffix}");
            for kind in [SlotKind::Pre, SlotKind::Del, SlotKind::Add] {
                let touched = match kind {
                    SlotKind::Pre => programmed.contains(&pre_action.as_str()),
                    _ => programmed.contains(&eff_action.as_str()),
                };
                let origin = if touched {
                    SlotOrigin::Programmed
                } else if cfg.known {
                    SlotOrigin::GivenInPartialModel
                } else {
                    SlotOrigin::Default
                };
                provenance.insert((schema.clone(), kind, atom.clone()), origin);
            }
        }
    }
    Ok(LearnedModel {
        schemas: schemas.into_values().collect(),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{compile_lambda_prime, parse_traces, CompileOptions, KnownSchema, LearningTask, PartialModel};
    use crate::pddl::fixtures::{blocksworld, blocksworld_schemas};
    use crate::harness::{solve_compiled, PlannerChoice};
    use crate::planner::SearchConfig;

    const TOWER: &str = include_str!("../../assets/domains/blocksworld/tower-inversion.trace");

    /// The tower trace with plans, everything but `stack` given.
    fn compiled() -> CompiledTask {
        let pm: PartialModel = blocksworld_schemas()
            .iter()
            .filter(|s| s.name != "stack")
            .map(|s| (s.name.clone(), KnownSchema::from_schema(s, true)))
            .collect();
        let task = LearningTask::new(&blocksworld(), &parse_traces(TOWER).unwrap(), true, Some(pm)).unwrap();
        compile_lambda_prime(&task, CompileOptions::default()).unwrap()
    }

    #[test]
    fn solution_decodes_to_a_well_formed_model() {
        let c = compiled();
        let run = solve_compiled(&c, &SearchConfig::default(), &PlannerChoice::Builtin).unwrap();
        let m = decode(run.result.plan.as_ref().unwrap(), &c).unwrap();
        assert_eq!(m.schemas.len(), 4);
        assert!(m.schemas.iter().all(|s| s.violations().is_empty()));
        let reference = blocksworld_schemas();
        let stack = |m: &[OperatorSchema]| m.iter().find(|s| s.name == "stack").cloned().unwrap();
        assert_eq!(stack(&m.schemas), stack(&reference));
        assert!(m.provenance.values().any(|o| *o == SlotOrigin::Programmed));
        assert!(m.provenance.values().any(|o| *o == SlotOrigin::GivenInPartialModel));
    }

    #[test]
    fn plans_that_miss_the_goal_are_rejected() {
        let c = compiled();
        assert!(matches!(decode(&Plan::new(Vec::new()), &c), Err(ModelError::PlanReplay(_))));
        let bogus = Plan::new(vec![crate::pddl::PlanStep::new("apply_stack", &["a", "b", "i1", "i2"])]);
        assert!(matches!(decode(&bogus, &c), Err(ModelError::PlanReplay(_))));
    }
}
