//! Learning tasks: predicates, operator headers, labels, optional plans and an
//! optional partially specified model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::pddl::parser::{ground_atoms, typed_objects};
use crate::pddl::sexpr::read_all;
use crate::pddl::{
    Atom, Domain, GroundState, OperatorSchema, PddlError, Plan, PlanStep, PredicateSignature, TypeHierarchy,
    EQUALITY,
};

use super::LearnError;

/// Name and parameter types of an operator to learn.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Header {
    pub name: String,
    pub param_types: Vec<String>,
}

impl Header {
    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

/// An observed (initial, final) state pair over a typed object set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub objects: BTreeMap<String, String>,
    pub initial: GroundState,
    pub final_state: GroundState,
}

/// One block of a trace file: a label and, optionally, the plan that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub label: Label,
    pub plan: Option<Plan>,
}

/// What is known in advance about one schema, over variable names `v1..vn`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnownSchema {
    pub pre: BTreeSet<Atom>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
    /// No further programming is allowed for this schema.
    pub complete: bool,
}

impl KnownSchema {
    pub fn from_schema(schema: &OperatorSchema, complete: bool) -> Self {
        let c = schema.canonical();
        Self {
            pre: c.pre,
            add: c.add,
            del: c.del,
            complete,
        }
    }
}

/// Schema name to known slots.
pub type PartialModel = BTreeMap<String, KnownSchema>;

/// Reads a partial model from a domain whose fully specified actions carry
/// a `;; @complete` annotation.
pub fn partial_model_from_domain(domain: &Domain) -> Result<PartialModel, LearnError> {
    let mut out = PartialModel::new();
    for action in domain.actions.values() {
        let schema = OperatorSchema::from_action(action)
            .ok_or_else(|| LearnError::Invalid(format!("partial model action {} is not STRIPS", action.name)))?;
        out.insert(action.name.clone(), KnownSchema::from_schema(&schema, action.complete));
    }
    Ok(out)
}

/// Marks the first ⌈n/2⌉ schemas (lexicographic order) of `reference` complete.
pub fn half_partial_model(reference: &[OperatorSchema]) -> PartialModel {
    let mut names: Vec<&OperatorSchema> = reference.iter().collect();
    names.sort_by(|a, b| a.name.cmp(&b.name));
    let keep = names.len().div_ceil(2);
    names
        .into_iter()
        .take(keep)
        .map(|s| (s.name.clone(), KnownSchema::from_schema(s, true)))
        .collect()
}

/// Everything the compiler needs to know about a learning problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningTask {
    pub domain_name: String,
    pub types: TypeHierarchy,
    /// Learnable predicates; equality is excluded.
    pub predicates: BTreeMap<String, PredicateSignature>,
    /// Sorted by name.
    pub headers: Vec<Header>,
    pub labels: Vec<Label>,
    pub plans: Option<Vec<Plan>>,
    pub partial_model: Option<PartialModel>,
}

impl LearningTask {
    /// Builds and validates a task. Predicates, types and headers come from `domain`
    /// (its action bodies are ignored).
    pub fn new(
        domain: &Domain,
        traces: &[Trace],
        use_plans: bool,
        partial_model: Option<PartialModel>,
    ) -> Result<Self, LearnError> {
        let headers: Vec<Header> = domain
            .actions
            .values()
            .map(|a| Header {
                name: a.name.clone(),
                param_types: a.params.iter().map(|p| p.ty.clone()).collect(),
            })
            .collect();
        let plans = if use_plans {
            Some(
                traces
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        t.plan
                            .clone()
                            .ok_or_else(|| LearnError::Invalid(format!("trace {} has no plan", i + 1)))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let task = LearningTask {
            domain_name: domain.name.clone(),
            types: domain.types.clone(),
            predicates: domain
                .predicates
                .iter()
                .filter(|(n, _)| n.as_str() != EQUALITY)
                .map(|(n, p)| (n.clone(), p.clone()))
                .collect(),
            headers,
            labels: traces.iter().map(|t| t.label.clone()).collect(),
            plans,
            partial_model,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn header(&self, name: &str) -> Option<&Header> {
        self.headers.iter().find(|h| h.name == name)
    }

    pub fn max_arity(&self) -> usize {
        self.headers.iter().map(Header::arity).max().unwrap_or(0)
    }

    /// Union of the labels' objects.
    pub fn objects(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for l in &self.labels {
            out.extend(l.objects.iter().map(|(a, b)| (a.clone(), b.clone())));
        }
        out
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.labels.is_empty() {
            return Err(LearnError::NoLabels);
        }
        for (i, l) in self.labels.iter().enumerate() {
            for (o, ty) in &l.objects {
                if !self.types.contains(ty) {
                    return Err(LearnError::LabelMismatch(format!(
                        "label {}: object {o} has unknown type {ty}",
                        i + 1
                    )));
                }
            }
            for a in l.initial.atoms.iter().chain(&l.final_state.atoms) {
                let sig = self.predicates.get(&a.predicate).ok_or_else(|| {
                    LearnError::LabelMismatch(format!("label {}: unknown predicate in {a}", i + 1))
                })?;
                if sig.arity() != a.args.len() {
                    return Err(LearnError::LabelMismatch(format!("label {}: arity mismatch in {a}", i + 1)));
                }
                for (o, ty) in a.args.iter().zip(&sig.param_types) {
                    let oty = l.objects.get(o).ok_or_else(|| {
                        LearnError::LabelMismatch(format!("label {}: undeclared object {o} in {a}", i + 1))
                    })?;
                    if !self.types.is_subtype(oty, ty) {
                        return Err(LearnError::LabelMismatch(format!(
                            "label {}: object {o} of type {oty} does not fit {ty} in {a}",
                            i + 1
                        )));
                    }
                }
            }
        }
        if let Some(plans) = &self.plans {
            if plans.len() != self.labels.len() {
                return Err(LearnError::Invalid(format!(
                    "{} plans for {} labels",
                    plans.len(),
                    self.labels.len()
                )));
            }
            for (t, plan) in plans.iter().enumerate() {
                for step in &plan.steps {
                    let h = self
                        .header(&step.name)
                        .ok_or_else(|| LearnError::UnknownHeader(step.name.clone()))?;
                    if h.arity() != step.args.len() {
                        return Err(LearnError::Invalid(format!(
                            "plan {}: {} expects {} arguments, found {}",
                            t + 1,
                            step.name,
                            h.arity(),
                            step.args.len()
                        )));
                    }
                    for (o, ty) in step.args.iter().zip(&h.param_types) {
                        let oty = self.labels[t].objects.get(o).ok_or_else(|| {
                            LearnError::LabelMismatch(format!("plan {}: undeclared object {o}", t + 1))
                        })?;
                        if !self.types.is_subtype(oty, ty) {
                            return Err(LearnError::LabelMismatch(format!(
                                "plan {}: object {o} does not fit parameter type {ty} of {}",
                                t + 1,
                                step.name
                            )));
                        }
                    }
                }
            }
        }
        if let Some(pm) = &self.partial_model {
            for name in pm.keys() {
                if self.header(name).is_none() {
                    return Err(LearnError::UnknownHeader(name.clone()));
                }
            }
        }
        Ok(())
    }
}

fn syntax(e: &crate::pddl::sexpr::SExpr, msg: &str) -> PddlError {
    PddlError::Syntax {
        pos: e.pos(),
        message: msg.to_string(),
    }
}

/// Parses a trace file: a sequence of
/// `(trace (:objects ...) (:init ...) [(:plan ...)] (:final ...))` blocks.
pub fn parse_traces(text: &str) -> Result<Vec<Trace>, PddlError> {
    let exprs = read_all(text).map_err(|e| PddlError::Syntax {
        pos: e.pos,
        message: e.message,
    })?;
    let mut out = Vec::new();
    for block in &exprs {
        if block.head().as_deref() != Some("trace") {
            return Err(syntax(block, "expected (trace ...)"));
        }
        let mut objects = BTreeMap::new();
        let mut init = None;
        let mut fin = None;
        let mut plan = None;
        for section in &block.as_list().expect("head implies list")[1..] {
            let items = section.as_list().ok_or_else(|| syntax(section, "expected a section"))?;
            match section.head().as_deref() {
                Some(":objects") => objects = typed_objects(&items[1..])?,
                Some(":init") => init = Some(GroundState::new(ground_atoms(&items[1..])?)),
                Some(":final") => fin = Some(GroundState::new(ground_atoms(&items[1..])?)),
                Some(":plan") => {
                    let mut steps = Vec::new();
                    for s in &items[1..] {
                        let atom = ground_atoms(std::slice::from_ref(s))?.remove(0);
                        steps.push(PlanStep {
                            name: atom.predicate,
                            args: atom.args,
                        });
                    }
                    plan = Some(Plan::new(steps));
                }
                _ => return Err(syntax(section, "unknown trace section")),
            }
        }
        let initial = init.ok_or_else(|| syntax(block, "trace without :init"))?;
        let final_state = fin.ok_or_else(|| syntax(block, "trace without :final"))?;
        if objects.is_empty() {
            for o in initial.objects().into_iter().chain(final_state.objects()) {
                objects.insert(o, crate::pddl::OBJECT_TYPE.to_string());
            }
        }
        out.push(Trace {
            label: Label {
                objects,
                initial,
                final_state,
            },
            plan,
        });
    }
    Ok(out)
}

/// Writes traces in the format read by [`parse_traces`].
pub fn print_traces(traces: &[Trace]) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str("(trace\n  (:objects");
        let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (o, ty) in &t.label.objects {
            by_type.entry(ty).or_default().push(o);
        }
        for (ty, os) in by_type {
            let _ = write!(out, " {} - {ty}", os.join(" "));
        }
        out.push_str(")\n  (:init");
        for a in &t.label.initial.atoms {
            let _ = write!(out, " {a}");
        }
        out.push(')');
        if let Some(plan) = &t.plan {
            out.push_str("\n  (:plan");
            for s in &plan.steps {
                let _ = write!(out, "\n    {s}");
            }
            out.push(')');
        }
        out.push_str("\n  (:final");
        for a in &t.label.final_state.atoms {
            let _ = write!(out, " {a}");
        }
        out.push_str("))\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::fixtures::{blocksworld, tower_final, tower_initial, tower_plan};

    const TOWER: &str = include_str!("../../assets/domains/blocksworld/tower-inversion.trace");

    #[test]
    fn parses_tower_inversion_trace() {
        let traces = parse_traces(TOWER).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].label.initial, tower_initial());
        assert_eq!(traces[0].label.final_state, tower_final());
        assert_eq!(traces[0].plan.as_ref().unwrap(), &tower_plan());
        assert_eq!(parse_traces(&print_traces(&traces)).unwrap(), traces);
    }

    #[test]
    fn task_validation_catches_mismatches() {
        let d = blocksworld();
        let mut traces = parse_traces(TOWER).unwrap();
        LearningTask::new(&d, &traces, true, None).unwrap();
        assert!(matches!(LearningTask::new(&d, &[], false, None), Err(LearnError::NoLabels)));
        traces[0].plan.as_mut().unwrap().steps.push(PlanStep::new("jump", &["a"]));
        assert!(matches!(
            LearningTask::new(&d, &traces, true, None),
            Err(LearnError::UnknownHeader(_))
        ));
        let mut traces = parse_traces(TOWER).unwrap();
        traces[0].label.objects.remove("d");
        assert!(matches!(
            LearningTask::new(&d, &traces, false, None),
            Err(LearnError::LabelMismatch(_))
        ));
    }

    #[test]
    fn half_model_takes_lexicographic_prefix() {
        let schemas = blocksworld().strips_schemas().unwrap();
        let pm = half_partial_model(&schemas);
        assert_eq!(pm.keys().collect::<Vec<_>>(), vec!["pickup", "putdown"]);
        assert!(pm.values().all(|k| k.complete));
    }

    #[test]
    fn partial_model_reads_complete_markers() {
        let mut d = blocksworld();
        d.actions.get_mut("stack").unwrap().complete = true;
        let text = crate::pddl::print_domain(&d);
        let parsed = crate::pddl::parse_domain(&text).unwrap();
        let pm = partial_model_from_domain(&parsed).unwrap();
        assert_eq!(pm.len(), 4);
        let complete: Vec<_> = pm.iter().filter(|(_, k)| k.complete).map(|(n, _)| n.as_str()).collect();
        assert_eq!(complete, vec!["stack"]);
    }
}
