//! Ground states and actions with exact conditional-effect semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::types::{Action, Literal, OperatorSchema, Precondition, EQUALITY};
use super::PddlError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        Self {
            predicate: predicate.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Renames every argument through `f`.
    pub fn map_objects(&self, f: impl Fn(&str) -> String) -> GroundAtom {
        GroundAtom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| f(a)).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundLiteral {
    pub atom: GroundAtom,
    pub positive: bool,
}

impl GroundLiteral {
    pub fn pos(atom: GroundAtom) -> Self {
        Self {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: GroundAtom) -> Self {
        Self {
            atom,
            positive: false,
        }
    }
}

impl fmt::Display for GroundLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

/// Closed-world state: the set of true atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GroundState {
    pub atoms: BTreeSet<GroundAtom>,
}

impl GroundState {
    pub fn new(atoms: impl IntoIterator<Item = GroundAtom>) -> Self {
        Self {
            atoms: atoms.into_iter().collect(),
        }
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Truth of a literal; equality is evaluated on its arguments.
    pub fn holds(&self, lit: &GroundLiteral) -> bool {
        let truth = if lit.atom.predicate == EQUALITY {
            lit.atom.args.len() == 2 && lit.atom.args[0] == lit.atom.args[1]
        } else {
            self.atoms.contains(&lit.atom)
        };
        truth == lit.positive
    }

    pub fn objects(&self) -> BTreeSet<String> {
        self.atoms.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }
}

impl fmt::Display for GroundState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundPrecondition {
    Lit(GroundLiteral),
    Or(GroundLiteral, GroundLiteral),
}

impl GroundPrecondition {
    pub fn holds(&self, state: &GroundState) -> bool {
        match self {
            GroundPrecondition::Lit(l) => state.holds(l),
            GroundPrecondition::Or(a, b) => state.holds(a) || state.holds(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundCondEffect {
    pub condition: Vec<GroundLiteral>,
    pub effect: Vec<GroundLiteral>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub precondition: Vec<GroundPrecondition>,
    pub effects: Vec<GroundCondEffect>,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

fn ground_literal(lit: &Literal, binding: &BTreeMap<&str, &str>) -> Result<GroundLiteral, String> {
    let atom = lit
        .atom
        .ground(&|v| binding.get(v).map(|s| s.to_string()))
        .ok_or_else(|| format!("unbound variable in {}", lit.atom))?;
    Ok(GroundLiteral {
        atom,
        positive: lit.positive,
    })
}

/// Instantiates a lifted action with `args` bound positionally to its parameters.
pub fn instantiate(action: &Action, args: &[String]) -> Result<GroundAction, PddlError> {
    if args.len() != action.params.len() {
        return Err(PddlError::ActionArity {
            action: action.name.clone(),
            expected: action.params.len(),
            found: args.len(),
        });
    }
    let binding: BTreeMap<&str, &str> = action
        .params
        .iter()
        .zip(args)
        .map(|(p, a)| (p.name.as_str(), a.as_str()))
        .collect();
    let err = |m: String| PddlError::Semantic(format!("action {}: {m}", action.name));
    let mut precondition = Vec::with_capacity(action.precondition.len());
    for p in &action.precondition {
        precondition.push(match p {
            Precondition::Lit(l) => GroundPrecondition::Lit(ground_literal(l, &binding).map_err(err)?),
            Precondition::Or(a, b) => GroundPrecondition::Or(
                ground_literal(a, &binding).map_err(err)?,
                ground_literal(b, &binding).map_err(err)?,
            ),
        });
    }
    let mut effects = Vec::with_capacity(action.effects.len());
    for e in &action.effects {
        let condition = e
            .condition
            .iter()
            .map(|l| ground_literal(l, &binding))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let effect = e
            .effect
            .iter()
            .map(|l| ground_literal(l, &binding))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        effects.push(GroundCondEffect { condition, effect });
    }
    Ok(GroundAction {
        name: action.name.clone(),
        args: args.to_vec(),
        precondition,
        effects,
    })
}

/// True iff every precondition conjunct holds in `state`.
pub fn applicable(state: &GroundState, action: &GroundAction) -> bool {
    action.precondition.iter().all(|p| p.holds(state))
}

/// Effect literals of every conditional effect whose condition holds in `state`.
pub fn triggered(state: &GroundState, action: &GroundAction) -> Vec<GroundLiteral> {
    action
        .effects
        .iter()
        .filter(|e| e.condition.iter().all(|c| state.holds(c)))
        .flat_map(|e| e.effect.iter().cloned())
        .collect()
}

/// Applies `action` in `state`: triggered deletes first, then triggered adds.
pub fn successor(state: &GroundState, action: &GroundAction) -> Result<GroundState, PddlError> {
    if !applicable(state, action) {
        return Err(PddlError::NotApplicable {
            action: action.to_string(),
        });
    }
    let fired = triggered(state, action);
    let mut next = state.atoms.clone();
    for l in fired.iter().filter(|l| !l.positive) {
        next.remove(&l.atom);
    }
    for l in fired.into_iter().filter(|l| l.positive) {
        next.insert(l.atom);
    }
    Ok(GroundState { atoms: next })
}

/// One plan step: action name and object arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanStep {
    pub name: String,
    pub args: Vec<String>,
}

impl PlanStep {
    pub fn new(name: &str, args: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Result of executing a plan step by step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replay {
    /// Every step applied; `trace[0]` is the initial state, the last entry the final one.
    Completed { trace: Vec<GroundState> },
    /// Step `index` (0-based) was not applicable; `trace` holds the states reached before it.
    Failed { index: usize, trace: Vec<GroundState> },
}

impl Replay {
    pub fn final_state(&self) -> Option<&GroundState> {
        match self {
            Replay::Completed { trace } => trace.last(),
            Replay::Failed { .. } => None,
        }
    }

    pub fn trace(&self) -> &[GroundState] {
        match self {
            Replay::Completed { trace } | Replay::Failed { trace, .. } => trace,
        }
    }
}

/// Replays `plan` from `initial` under the lifted `actions`.
pub fn replay_actions(
    initial: &GroundState,
    plan: &Plan,
    actions: &BTreeMap<String, Action>,
) -> Result<Replay, PddlError> {
    let mut trace = vec![initial.clone()];
    for (index, step) in plan.steps.iter().enumerate() {
        let lifted = actions
            .get(&step.name)
            .ok_or_else(|| PddlError::UnknownAction(step.name.clone()))?;
        let ground = instantiate(lifted, &step.args)?;
        let current = trace.last().expect("trace starts non-empty");
        if !applicable(current, &ground) {
            return Ok(Replay::Failed { index, trace });
        }
        let next = successor(current, &ground)?;
        trace.push(next);
    }
    Ok(Replay::Completed { trace })
}

/// Replays `plan` from `initial` under a STRIPS model.
pub fn replay(initial: &GroundState, plan: &Plan, model: &[OperatorSchema]) -> Result<Replay, PddlError> {
    let actions: BTreeMap<String, Action> = model.iter().map(|s| (s.name.clone(), s.to_action())).collect();
    replay_actions(initial, plan, &actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::fixtures::{blocksworld_schemas, tower_initial, tower_plan, tower_final};
    use crate::pddl::types::{Atom, CondEffect, Param, Term};

    fn ga(p: &str, args: &[&str]) -> GroundAtom {
        GroundAtom::new(p, args)
    }

    fn stack() -> OperatorSchema {
        blocksworld_schemas().into_iter().find(|s| s.name == "stack").unwrap()
    }

    #[test]
    fn empty_precondition_is_always_applicable() {
        let a = GroundAction {
            name: "noop".into(),
            args: vec![],
            precondition: vec![],
            effects: vec![],
        };
        assert!(applicable(&GroundState::default(), &a));
        let s = GroundState::new([ga("p", &[])]);
        assert!(applicable(&s, &a));
        assert_eq!(successor(&s, &a).unwrap(), s);
    }

    #[test]
    fn stack_applicability_follows_binding_order() {
        let s = GroundState::new([ga("holding", &["a"]), ga("clear", &["b"])]);
        let act = stack().to_action();
        let ab = instantiate(&act, &["a".into(), "b".into()]).unwrap();
        let ba = instantiate(&act, &["b".into(), "a".into()]).unwrap();
        assert!(applicable(&s, &ab));
        assert!(!applicable(&s, &ba));
    }

    #[test]
    fn stack_successor_matches_reference_effects() {
        let s = GroundState::new([ga("holding", &["a"]), ga("clear", &["b"]), ga("ontable", &["b"])]);
        let ab = instantiate(&stack().to_action(), &["a".into(), "b".into()]).unwrap();
        let next = successor(&s, &ab).unwrap();
        let expected = GroundState::new([
            ga("handempty", &[]),
            ga("clear", &["a"]),
            ga("on", &["a", "b"]),
            ga("ontable", &["b"]),
        ]);
        assert_eq!(next, expected);
        let ba = instantiate(&stack().to_action(), &["b".into(), "a".into()]).unwrap();
        assert!(matches!(successor(&s, &ba), Err(PddlError::NotApplicable { .. })));
    }

    #[test]
    fn delete_before_add_keeps_atom_true() {
        let mut act = Action::new("flip", vec![]);
        let p = Atom::new("p", vec![]);
        act.effects.insert(CondEffect::unconditional([Literal::neg(p.clone())]));
        act.effects.insert(CondEffect::new([Literal::pos(p.clone())], [Literal::pos(p)]));
        let g = instantiate(&act, &[]).unwrap();
        let s = GroundState::new([ga("p", &[])]);
        assert_eq!(successor(&s, &g).unwrap(), s);
    }

    #[test]
    fn untriggered_conditional_effect_contributes_nothing() {
        let mut act = Action::new("maybe", vec![Param::new("x", "object")]);
        act.effects.insert(CondEffect::new(
            [Literal::pos(Atom::new("flag", vec![]))],
            [Literal::pos(Atom::new("done", vec![Term::var("x")]))],
        ));
        let g = instantiate(&act, &["a".into()]).unwrap();
        let s = GroundState::default();
        assert!(successor(&s, &g).unwrap().is_empty());
        let s = GroundState::new([ga("flag", &[])]);
        assert!(successor(&s, &g).unwrap().contains(&ga("done", &["a"])));
    }

    #[test]
    fn equality_is_evaluated_not_stored() {
        let s = GroundState::default();
        assert!(s.holds(&GroundLiteral::pos(ga("=", &["a", "a"]))));
        assert!(s.holds(&GroundLiteral::neg(ga("=", &["a", "b"]))));
    }

    #[test]
    fn empty_plan_replays_to_initial() {
        let init = tower_initial();
        let r = replay(&init, &Plan::default(), &blocksworld_schemas()).unwrap();
        assert_eq!(r, Replay::Completed { trace: vec![init] });
    }

    #[test]
    fn tower_inversion_plan_reaches_label_final_state() {
        let r = replay(&tower_initial(), &tower_plan(), &blocksworld_schemas()).unwrap();
        assert_eq!(r.final_state(), Some(&tower_final()));
        assert_eq!(r.trace().len(), 9);
    }

    #[test]
    fn missing_add_still_executes_but_misses_final_state() {
        let mut model = blocksworld_schemas();
        for s in model.iter_mut().filter(|s| s.name == "stack") {
            s.add.remove(&Atom::vars("on", &["v1", "v2"]));
        }
        let r = replay(&tower_initial(), &tower_plan(), &model).unwrap();
        let fin = r.final_state().expect("still executable");
        assert_ne!(fin, &tower_final());
    }

    #[test]
    fn replay_reports_first_inapplicable_step_and_bad_names() {
        let plan = Plan::new(vec![PlanStep::new("pickup", &["a"])]);
        let r = replay(&tower_initial(), &plan, &blocksworld_schemas()).unwrap();
        assert!(matches!(r, Replay::Failed { index: 0, .. }));
        let plan = Plan::new(vec![PlanStep::new("fly", &["a"])]);
        assert!(matches!(
            replay(&tower_initial(), &plan, &blocksworld_schemas()),
            Err(PddlError::UnknownAction(_))
        ));
        let plan = Plan::new(vec![PlanStep::new("pickup", &["a", "b"])]);
        assert!(matches!(
            replay(&tower_initial(), &plan, &blocksworld_schemas()),
            Err(PddlError::ActionArity { .. })
        ));
    }
}
