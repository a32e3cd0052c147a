//! Compilation of a learning task into a classical planning task whose
//! solutions program an action model and then validate it against the labels.
//!
//! Every candidate atom `f` of schema `ξ` owns up to three slot fluents,
//! `pre_f_ξ`, `del_f_ξ` and `add_f_ξ`. While `modeprog` holds, programming
//! actions edit slots; the first `apply_ξ` or `validate_t` ends programming.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use crate::pddl::{
    Action, Atom, CondEffect, Domain, GroundAtom, Literal, Param, Precondition, PredicateSignature, Problem,
    Requirement, Term, OBJECT_TYPE,
};

use super::hypothesis::{build_hypothesis_space, index_tuples, HypothesisSpace};
use super::statics::{analyze_statics, StaticAnalysis};
use super::task::{LearningTask, PartialModel};
use super::LearnError;

pub const MODE_PROG: &str = "modeprog";
pub const AT_STEP: &str = "at_step";
pub const NEXT_STEP: &str = "next_step";
pub const STEP_TYPE: &str = "step";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotKind {
    Pre,
    Del,
    Add,
}

impl SlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotKind::Pre => "pre",
            SlotKind::Del => "del",
            SlotKind::Add => "add",
        }
    }

    pub fn parse(s: &str) -> Option<SlotKind> {
        match s {
            "pre" => Some(SlotKind::Pre),
            "del" => Some(SlotKind::Del),
            "add" => Some(SlotKind::Add),
            _ => None,
        }
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Only (initial, final) labels constrain the model.
    Labels,
    /// Labels plus the plan that produced each of them.
    LabeledPlans,
}

/// How one candidate atom of one schema is represented in the compiled task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotConfig {
    pub pre_fluent: bool,
    /// `del_f` and `add_f` exist.
    pub effect_fluents: bool,
    pub init_pre: bool,
    pub init_del: bool,
    pub init_add: bool,
    pub program_pre: bool,
    pub program_eff: bool,
    /// Fixed by the partial model.
    pub known: bool,
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self {
            pre_fluent: true,
            effect_fluents: true,
            init_pre: true,
            init_del: false,
            init_add: false,
            program_pre: true,
            program_eff: true,
            known: false,
        }
    }
}

/// Maps a slot fluent back to the schema, slot kind and candidate atom it encodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DecodeEntry {
    pub fluent: String,
    pub schema: String,
    pub kind: SlotKind,
    pub atom: Atom,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileOptions {
    pub static_pruning: bool,
    pub symmetry_breaking: bool,
}

#[derive(Debug, Clone)]
pub struct CompiledTask {
    pub variant: Variant,
    pub task: LearningTask,
    pub hypothesis: HypothesisSpace,
    /// Schema name to candidate atom to its configuration.
    pub slots: BTreeMap<String, BTreeMap<Atom, SlotConfig>>,
    pub statics: Option<StaticAnalysis>,
    pub symmetry_breaking: bool,
}

fn fluent_name(kind: SlotKind, schema: &str, atom: &Atom) -> String {
    let mut s = format!("{}_{}_{}", kind.as_str(), atom.predicate, schema);
    for v in atom.variables() {
        s.push('_');
        s.push_str(v);
    }
    s
}

fn nullary(name: &str) -> Atom {
    Atom::new(name, Vec::new())
}

fn ground_to_atom(g: &GroundAtom) -> Atom {
    Atom::new(&g.predicate, g.args.iter().map(|a| Term::Const(a.clone())).collect())
}

fn step_object(j: usize) -> String {
    format!("i{j}")
}

fn test_fluent(t: usize) -> String {
    format!("test_{t}")
}

fn plan_predicate(schema: &str) -> String {
    format!("plan_{schema}")
}

fn object_var(i: usize) -> String {
    format!("o{}", i + 1)
}

/// Renames `v1..vn` to the apply action's `o1..on`.
fn to_apply_vars(atom: &Atom) -> Atom {
    Atom::new(
        &atom.predicate,
        atom.args
            .iter()
            .map(|t| match t {
                Term::Var(v) => Term::Var(format!("o{}", &v[1..])),
                c => c.clone(),
            })
            .collect(),
    )
}

impl CompiledTask {
    pub fn pre_fluent(schema: &str, atom: &Atom) -> String {
        fluent_name(SlotKind::Pre, schema, atom)
    }

    pub fn del_fluent(schema: &str, atom: &Atom) -> String {
        fluent_name(SlotKind::Del, schema, atom)
    }

    pub fn add_fluent(schema: &str, atom: &Atom) -> String {
        fluent_name(SlotKind::Add, schema, atom)
    }

    pub fn slot(&self, schema: &str, atom: &Atom) -> Option<&SlotConfig> {
        self.slots.get(schema).and_then(|m| m.get(atom))
    }

    /// Existing slot fluents and what they decode to.
    pub fn decode_table(&self) -> Vec<DecodeEntry> {
        let mut out = Vec::new();
        for (schema, slots) in &self.slots {
            for (atom, cfg) in slots {
                let mut push = |kind| {
                    out.push(DecodeEntry {
                        fluent: fluent_name(kind, schema, atom),
                        schema: schema.clone(),
                        kind,
                        atom: atom.clone(),
                    })
                };
                if cfg.pre_fluent {
                    push(SlotKind::Pre);
                }
                if cfg.effect_fluents {
                    push(SlotKind::Del);
                    push(SlotKind::Add);
                }
            }
        }
        out.sort();
        out
    }

    /// Union of the labels' objects.
    pub fn objects(&self) -> BTreeMap<String, String> {
        self.task.objects()
    }

    /// Longest plan; zero for the labels-only variant.
    pub fn max_plan_length(&self) -> usize {
        match (&self.variant, &self.task.plans) {
            (Variant::LabeledPlans, Some(plans)) => plans.iter().map(|p| p.len()).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn program_action_count(&self) -> usize {
        self.slots
            .values()
            .flat_map(|m| m.values())
            .map(|c| usize::from(c.program_pre) + usize::from(c.program_eff))
            .sum()
    }

    /// Upper bound on the length of a shortest solution of the plans variant:
    /// each programming action fires at most once, then the plans and the
    /// validations run.
    pub fn plan_length_bound(&self) -> usize {
        let plans: usize = self.task.plans.iter().flatten().map(|p| p.len()).sum();
        self.program_action_count() + plans + self.task.labels.len()
    }

    pub(crate) fn programmable(&self) -> Vec<(&str, &Atom, &SlotConfig)> {
        self.slots
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(a, c)| (s.as_str(), a, c)))
            .filter(|(_, _, c)| c.program_pre || c.program_eff)
            .collect()
    }

    fn typed_atoms(&self, objects: &BTreeMap<String, String>) -> Vec<GroundAtom> {
        let mut out = Vec::new();
        for sig in self.task.predicates.values() {
            let candidates: Vec<Vec<&String>> = sig
                .param_types
                .iter()
                .map(|ty| {
                    objects
                        .iter()
                        .filter(|(_, oty)| self.task.types.is_subtype(oty, ty))
                        .map(|(o, _)| o)
                        .collect()
                })
                .collect();
            let sizes: Vec<usize> = candidates.iter().map(Vec::len).collect();
            if sizes.contains(&0) && !sizes.is_empty() {
                continue;
            }
            let n = sizes.iter().copied().max().unwrap_or(0);
            for idx in index_tuples(n, sig.arity()) {
                if idx.iter().zip(&sizes).all(|(i, s)| i < s) {
                    out.push(GroundAtom {
                        predicate: sig.name.clone(),
                        args: idx.iter().zip(&candidates).map(|(&i, c)| c[i].clone()).collect(),
                    });
                }
            }
        }
        out
    }

    fn program_actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        let order: Vec<(&str, &Atom)> = self.programmable().into_iter().map(|(s, a, _)| (s, a)).collect();
        let lock = |k: usize| nullary(&format!("locked_{k}"));
        for (k, (schema, atom, cfg)) in self.programmable().into_iter().enumerate() {
            let pre_f = nullary(&Self::pre_fluent(schema, atom));
            let del_f = nullary(&Self::del_fluent(schema, atom));
            let add_f = nullary(&Self::add_fluent(schema, atom));
            let suffix = &Self::pre_fluent(schema, atom)[4..];
            let mut common: BTreeSet<Precondition> = BTreeSet::new();
            common.insert(Precondition::Lit(Literal::pos(nullary(MODE_PROG))));
            if cfg.effect_fluents {
                common.insert(Precondition::Lit(Literal::neg(del_f.clone())));
                common.insert(Precondition::Lit(Literal::neg(add_f.clone())));
            }
            let mut locks = BTreeSet::new();
            if self.symmetry_breaking {
                common.insert(Precondition::Lit(Literal::neg(lock(k))));
                locks.extend((0..k).map(|j| Literal::pos(lock(j))));
            }
            debug_assert_eq!(order[k], (schema, atom));
            if cfg.program_pre && cfg.pre_fluent {
                let mut a = Action::new(&format!("program_pre_{suffix}"), Vec::new());
                a.precondition = common.clone();
                a.precondition.insert(Precondition::Lit(Literal::pos(pre_f.clone())));
                let mut eff = locks.clone();
                eff.insert(Literal::neg(pre_f.clone()));
                a.effects.insert(CondEffect::unconditional(eff));
                out.push(a);
            }
            if cfg.program_eff && cfg.effect_fluents {
                let mut a = Action::new(&format!("program_eff_{suffix}"), Vec::new());
                a.precondition = common;
                if cfg.pre_fluent {
                    a.effects.insert(CondEffect::new([Literal::pos(pre_f.clone())], [Literal::pos(del_f)]));
                    a.effects.insert(CondEffect::new([Literal::neg(pre_f)], [Literal::pos(add_f)]));
                    if !locks.is_empty() {
                        a.effects.insert(CondEffect::unconditional(locks));
                    }
                } else {
                    let mut eff = locks;
                    eff.insert(Literal::pos(add_f));
                    a.effects.insert(CondEffect::unconditional(eff));
                }
                out.push(a);
            }
        }
        out
    }

    fn apply_action(&self, schema: &str) -> Action {
        let header = self.task.header(schema).expect("slots follow headers");
        let mut params: Vec<Param> = header
            .param_types
            .iter()
            .enumerate()
            .map(|(i, ty)| Param::new(&object_var(i), ty))
            .collect();
        let prime = self.variant == Variant::LabeledPlans;
        if prime {
            params.push(Param::new("i1", STEP_TYPE));
            params.push(Param::new("i2", STEP_TYPE));
        }
        let mut a = Action::new(&format!("apply_{schema}"), params);
        let mut unconditional = BTreeSet::new();
        for (atom, cfg) in &self.slots[schema] {
            let lifted = to_apply_vars(atom);
            if cfg.pre_fluent {
                a.precondition.insert(Precondition::implies(
                    Literal::pos(nullary(&Self::pre_fluent(schema, atom))),
                    Literal::pos(lifted.clone()),
                ));
            }
            if cfg.effect_fluents {
                a.effects.insert(CondEffect::new(
                    [Literal::pos(nullary(&Self::del_fluent(schema, atom)))],
                    [Literal::neg(lifted.clone())],
                ));
                a.effects.insert(CondEffect::new(
                    [Literal::pos(nullary(&Self::add_fluent(schema, atom)))],
                    [Literal::pos(lifted)],
                ));
            }
        }
        a.effects.insert(CondEffect::new(
            [Literal::pos(nullary(MODE_PROG))],
            [Literal::neg(nullary(MODE_PROG))],
        ));
        if prime {
            let mut args: Vec<Term> = (0..header.arity()).map(|i| Term::Var(object_var(i))).collect();
            args.push(Term::var("i1"));
            a.precondition
                .insert(Precondition::Lit(Literal::pos(Atom::new(&plan_predicate(schema), args))));
            a.precondition
                .insert(Precondition::Lit(Literal::pos(Atom::vars(AT_STEP, &["i1"]))));
            a.precondition
                .insert(Precondition::Lit(Literal::pos(Atom::vars(NEXT_STEP, &["i1", "i2"]))));
            unconditional.insert(Literal::neg(Atom::vars(AT_STEP, &["i1"])));
            unconditional.insert(Literal::pos(Atom::vars(AT_STEP, &["i2"])));
            a.effects.insert(CondEffect::unconditional(unconditional));
        }
        a
    }

    fn plan_fluents(&self, t: usize) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        if self.variant != Variant::LabeledPlans {
            return out;
        }
        if let Some(plan) = self.task.plans.as_ref().and_then(|p| p.get(t)) {
            for (j, step) in plan.steps.iter().enumerate() {
                let mut args: Vec<Term> = step.args.iter().map(|o| Term::Const(o.clone())).collect();
                args.push(Term::Const(step_object(j + 1)));
                out.insert(Atom::new(&plan_predicate(&step.name), args));
            }
        }
        out
    }

    fn validate_action(&self, t: usize, universe: &[GroundAtom]) -> Action {
        let tau = self.task.labels.len();
        let label = &self.task.labels[t];
        let mut a = Action::new(&format!("validate_{}", t + 1), Vec::new());
        for g in universe {
            let lit = if label.final_state.contains(g) {
                Literal::pos(ground_to_atom(g))
            } else {
                Literal::neg(ground_to_atom(g))
            };
            a.precondition.insert(Precondition::Lit(lit));
        }
        for j in 0..tau {
            let lit = nullary(&test_fluent(j + 1));
            a.precondition
                .insert(Precondition::Lit(if j < t { Literal::pos(lit) } else { Literal::neg(lit) }));
        }
        let mut dels: BTreeSet<Atom> = BTreeSet::new();
        let mut adds: BTreeSet<Atom> = BTreeSet::new();
        adds.insert(nullary(&test_fluent(t + 1)));
        if self.variant == Variant::LabeledPlans {
            let n = self.task.plans.as_ref().map_or(0, |p| p[t].len());
            let at_end = Atom::new(AT_STEP, vec![Term::Const(step_object(n + 1))]);
            a.precondition.insert(Precondition::Lit(Literal::pos(at_end.clone())));
            if t + 1 < tau {
                dels.insert(at_end);
                adds.insert(Atom::new(AT_STEP, vec![Term::Const(step_object(1))]));
                dels.extend(self.plan_fluents(t));
                adds.extend(self.plan_fluents(t + 1));
            }
        }
        if t + 1 < tau {
            let next = &self.task.labels[t + 1].initial;
            for g in &label.final_state.atoms {
                if !next.contains(g) {
                    dels.insert(ground_to_atom(g));
                }
            }
            for g in &next.atoms {
                if !label.final_state.contains(g) {
                    adds.insert(ground_to_atom(g));
                }
            }
        }
        // an atom both deleted and added ends up true
        let mut effect: BTreeSet<Literal> = dels.difference(&adds).cloned().map(Literal::neg).collect();
        effect.extend(adds.into_iter().map(Literal::pos));
        a.effects.insert(CondEffect::unconditional(effect));
        a.effects.insert(CondEffect::new(
            [Literal::pos(nullary(MODE_PROG))],
            [Literal::neg(nullary(MODE_PROG))],
        ));
        a
    }

    fn constants(&self) -> BTreeMap<String, String> {
        let mut out = self.objects();
        if self.variant == Variant::LabeledPlans {
            for j in 1..=self.max_plan_length() + 1 {
                out.insert(step_object(j), STEP_TYPE.to_string());
            }
        }
        out
    }

    /// The compiled planning domain. Label objects are domain constants.
    pub fn domain(&self) -> Domain {
        let mut d = Domain::new(&format!("learn-{}", self.task.domain_name));
        d.requirements = [
            Requirement::Strips,
            Requirement::Typing,
            Requirement::NegativePreconditions,
            Requirement::DisjunctivePreconditions,
            Requirement::ConditionalEffects,
        ]
        .into_iter()
        .collect();
        d.types = self.task.types.clone();
        let prime = self.variant == Variant::LabeledPlans;
        if prime {
            d.types.declare(STEP_TYPE, OBJECT_TYPE);
        }
        d.constants = self.constants();
        for sig in self.task.predicates.values() {
            d.add_predicate(sig.clone());
        }
        d.add_predicate(PredicateSignature::new(MODE_PROG, &[]));
        for e in self.decode_table() {
            d.add_predicate(PredicateSignature::new(&e.fluent, &[]));
        }
        for t in 0..self.task.labels.len() {
            d.add_predicate(PredicateSignature::new(&test_fluent(t + 1), &[]));
        }
        if self.symmetry_breaking {
            for k in 0..self.programmable().len() {
                d.add_predicate(PredicateSignature::new(&format!("locked_{k}"), &[]));
            }
        }
        if prime {
            d.add_predicate(PredicateSignature::new(AT_STEP, &[STEP_TYPE]));
            d.add_predicate(PredicateSignature::new(NEXT_STEP, &[STEP_TYPE, STEP_TYPE]));
            for h in &self.task.headers {
                let mut types: Vec<&str> = h.param_types.iter().map(String::as_str).collect();
                types.push(STEP_TYPE);
                d.add_predicate(PredicateSignature::new(&plan_predicate(&h.name), &types));
            }
        }
        for a in self.program_actions() {
            d.add_action(a);
        }
        for h in &self.task.headers {
            d.add_action(self.apply_action(&h.name));
        }
        let objects = self.objects();
        let universe = self.typed_atoms(&objects);
        for t in 0..self.task.labels.len() {
            d.add_action(self.validate_action(t, &universe));
        }
        d
    }

    /// The compiled planning problem: first label's initial state plus the
    /// initial slot configuration; the goal is every `test_t`.
    pub fn problem(&self) -> Problem {
        let mut p = Problem::new(
            &format!("learn-{}-{}", self.task.domain_name, self.task.labels.len()),
            &format!("learn-{}", self.task.domain_name),
        );
        p.init.extend(self.task.labels[0].initial.atoms.iter().cloned());
        p.init.insert(GroundAtom::new(MODE_PROG, &[]));
        for (schema, slots) in &self.slots {
            for (atom, cfg) in slots {
                if cfg.pre_fluent && cfg.init_pre {
                    p.init.insert(GroundAtom::new(&Self::pre_fluent(schema, atom), &[]));
                }
                if cfg.effect_fluents && cfg.init_del {
                    p.init.insert(GroundAtom::new(&Self::del_fluent(schema, atom), &[]));
                }
                if cfg.effect_fluents && cfg.init_add {
                    p.init.insert(GroundAtom::new(&Self::add_fluent(schema, atom), &[]));
                }
            }
        }
        if self.variant == Variant::LabeledPlans {
            for a in self.plan_fluents(0) {
                let args: Vec<&str> = a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => c.as_str(),
                        Term::Var(_) => unreachable!("plan fluents are ground"),
                    })
                    .collect();
                p.init.insert(GroundAtom::new(&a.predicate, &args));
            }
            p.init.insert(GroundAtom::new(AT_STEP, &[&step_object(1)]));
            for j in 1..=self.max_plan_length() {
                p.init
                    .insert(GroundAtom::new(NEXT_STEP, &[&step_object(j), &step_object(j + 1)]));
            }
        }
        for t in 0..self.task.labels.len() {
            p.goal
                .insert(crate::pddl::GroundLiteral::pos(GroundAtom::new(&test_fluent(t + 1), &[])));
        }
        p
    }

    /// Sidecar text: one `<fluent> <schema> <kind> <atom>` line per slot fluent.
    pub fn decode_table_text(&self) -> String {
        let mut out = String::new();
        for e in self.decode_table() {
            let _ = writeln!(out, "{} {} {} {}", e.fluent, e.schema, e.kind, e.atom);
        }
        out
    }

    fn check_names(&self) -> Result<(), LearnError> {
        let mut generated: BTreeSet<String> = BTreeSet::new();
        let mut claim = |name: String| {
            if self.task.predicates.contains_key(&name) || !generated.insert(name.clone()) {
                Err(LearnError::NameClash(name))
            } else {
                Ok(())
            }
        };
        claim(MODE_PROG.to_string())?;
        for e in self.decode_table() {
            claim(e.fluent)?;
        }
        for t in 0..self.task.labels.len() {
            claim(test_fluent(t + 1))?;
        }
        if self.symmetry_breaking {
            for k in 0..self.programmable().len() {
                claim(format!("locked_{k}"))?;
            }
        }
        if self.variant == Variant::LabeledPlans {
            claim(AT_STEP.to_string())?;
            claim(NEXT_STEP.to_string())?;
            for h in &self.task.headers {
                claim(plan_predicate(&h.name))?;
            }
            if self.task.types.contains(STEP_TYPE) {
                return Err(LearnError::NameClash(format!("type {STEP_TYPE}")));
            }
            let objects = self.objects();
            for j in 1..=self.max_plan_length() + 1 {
                if objects.contains_key(&step_object(j)) {
                    return Err(LearnError::NameClash(format!("object {}", step_object(j))));
                }
            }
        }
        let mut actions = BTreeSet::new();
        for a in self.program_actions() {
            if !actions.insert(a.name.clone()) {
                return Err(LearnError::NameClash(a.name));
            }
        }
        Ok(())
    }
}

fn base(task: &LearningTask, variant: Variant, options: CompileOptions) -> Result<CompiledTask, LearnError> {
    task.validate()?;
    let hypothesis = build_hypothesis_space(task);
    let slots = hypothesis
        .atoms
        .iter()
        .map(|(s, atoms)| (s.clone(), atoms.iter().map(|a| (a.clone(), SlotConfig::default())).collect()))
        .collect();
    let mut compiled = CompiledTask {
        variant,
        task: task.clone(),
        hypothesis,
        slots,
        statics: None,
        symmetry_breaking: options.symmetry_breaking,
    };
    if let Some(pm) = &task.partial_model {
        inject_partial_model(&mut compiled, pm)?;
    }
    if options.static_pruning {
        let sa = analyze_statics(&compiled.task, &compiled.hypothesis);
        prune_with_statics(&mut compiled, &sa);
    }
    compiled.check_names()?;
    Ok(compiled)
}

/// Compiles using only the labels; any plans in `task` are ignored.
pub fn compile_lambda(task: &LearningTask, options: CompileOptions) -> Result<CompiledTask, LearnError> {
    let mut labels_only = task.clone();
    labels_only.plans = None;
    base(&labels_only, Variant::Labels, options)
}

/// Compiles labels together with their plans; applications must follow the plans.
pub fn compile_lambda_prime(task: &LearningTask, options: CompileOptions) -> Result<CompiledTask, LearnError> {
    if task.plans.is_none() {
        return Err(LearnError::Invalid("the plans variant needs a plan per label".into()));
    }
    base(task, Variant::LabeledPlans, options)
}

/// Fixes the slots a partial model knows about: known atoms are set in the
/// initial state and lose their programming actions; complete schemas lose all.
pub fn inject_partial_model(compiled: &mut CompiledTask, model: &PartialModel) -> Result<(), LearnError> {
    for (schema, known) in model {
        let slots = compiled
            .slots
            .get_mut(schema)
            .ok_or_else(|| LearnError::UnknownHeader(schema.clone()))?;
        for atom in known.pre.iter().chain(&known.add).chain(&known.del) {
            if !slots.contains_key(atom) {
                return Err(LearnError::OutsideHypothesis {
                    schema: schema.clone(),
                    atom: atom.clone(),
                });
            }
        }
        let malformed = |reason: String| LearnError::MalformedPartialModel {
            schema: schema.clone(),
            reason,
        };
        if let Some(a) = known.del.iter().find(|a| !known.pre.contains(*a)) {
            return Err(malformed(format!("deleted atom {a} is not a precondition")));
        }
        if let Some(a) = known.add.iter().find(|a| known.del.contains(*a) || known.pre.contains(*a)) {
            return Err(malformed(format!("added atom {a} is also deleted or required")));
        }
        for (atom, cfg) in slots.iter_mut() {
            if known.complete {
                *cfg = SlotConfig {
                    init_pre: known.pre.contains(atom),
                    init_del: known.del.contains(atom),
                    init_add: known.add.contains(atom),
                    program_pre: false,
                    program_eff: false,
                    known: true,
                    ..cfg.clone()
                };
            } else if known.add.contains(atom) {
                cfg.init_pre = false;
                cfg.init_add = true;
                cfg.program_pre = false;
                cfg.program_eff = false;
                cfg.known = true;
            } else if known.del.contains(atom) {
                cfg.init_pre = true;
                cfg.init_del = true;
                cfg.program_pre = false;
                cfg.program_eff = false;
                cfg.known = true;
            } else if known.pre.contains(atom) {
                cfg.init_pre = true;
                cfg.program_pre = false;
                cfg.known = true;
            }
        }
    }
    compiled.task.partial_model = Some(model.clone());
    Ok(())
}

/// Drops effect slots of static predicates and precondition slots of static
/// atoms that can never hold. With plans, static atoms that held at every
/// occurrence stay fixed preconditions. Slots fixed by a partial model are kept.
pub fn prune_with_statics(compiled: &mut CompiledTask, sa: &StaticAnalysis) {
    let prime = compiled.variant == Variant::LabeledPlans;
    for (schema, slots) in compiled.slots.iter_mut() {
        for (atom, cfg) in slots.iter_mut() {
            if !sa.is_static(&atom.predicate) {
                continue;
            }
            if !(cfg.init_del || cfg.init_add) {
                cfg.effect_fluents = false;
                cfg.program_eff = false;
            }
            let fixed_pre = cfg.known && cfg.init_pre;
            if sa.is_forbidden(schema, atom) && !fixed_pre {
                cfg.pre_fluent = false;
                cfg.init_pre = false;
                cfg.program_pre = false;
            } else if prime && sa.is_forced(schema, atom) && cfg.program_pre {
                cfg.program_pre = false;
            }
        }
    }
    compiled.statics = Some(sa.clone());
}

/// Parses the sidecar written by [`CompiledTask::decode_table_text`].
pub fn parse_decode_table(text: &str) -> Result<Vec<DecodeEntry>, LearnError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || LearnError::Invalid(format!("decode table line {}: {line}", i + 1));
        let mut parts = line.splitn(4, ' ');
        let fluent = parts.next().ok_or_else(bad)?.to_string();
        let schema = parts.next().ok_or_else(bad)?.to_string();
        let kind = parts.next().and_then(SlotKind::parse).ok_or_else(bad)?;
        let atom_text = parts.next().ok_or_else(bad)?;
        let inner = atom_text
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(bad)?;
        let mut words = inner.split_whitespace();
        let predicate = words.next().ok_or_else(bad)?;
        let args = words
            .map(|w| match w.strip_prefix('?') {
                Some(v) => Term::var(v),
                None => Term::constant(w),
            })
            .collect();
        out.push(DecodeEntry {
            fluent,
            schema,
            kind,
            atom: Atom::new(predicate, args),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::task::{parse_traces, KnownSchema};
    use crate::pddl::fixtures::{blocksworld, blocksworld_schemas};
    use crate::pddl::{parse_domain, print_domain, print_problem};

    const TOWER: &str = include_str!("../../assets/domains/blocksworld/tower-inversion.trace");

    fn tower_task(plans: bool) -> LearningTask {
        LearningTask::new(&blocksworld(), &parse_traces(TOWER).unwrap(), plans, None).unwrap()
    }

    #[test]
    fn apply_stack_has_one_implication_per_candidate() {
        let c = compile_lambda(&tower_task(false), CompileOptions::default()).unwrap();
        let d = c.domain();
        let stack = &d.actions["apply_stack"];
        assert_eq!(stack.implication_count(), 11);
        assert_eq!(stack.conditional_effect_count(), 23);
        assert_eq!(c.decode_table().len(), 3 * 32);
        assert_eq!(c.program_action_count(), 64);
    }

    #[test]
    fn compiled_task_round_trips_through_text() {
        for plans in [false, true] {
            let task = tower_task(plans);
            let c = if plans {
                compile_lambda_prime(&task, CompileOptions::default()).unwrap()
            } else {
                compile_lambda(&task, CompileOptions::default()).unwrap()
            };
            let d = c.domain();
            let text = print_domain(&d);
            let back = parse_domain(&text).unwrap();
            assert_eq!(back.actions, d.actions);
            let p = c.problem();
            let pb = crate::pddl::parse_problem(&print_problem(&p)).unwrap();
            crate::pddl::parser::check_problem(&back, &pb).unwrap();
            assert_eq!(pb.init, p.init);
            assert_eq!(parse_decode_table(&c.decode_table_text()).unwrap(), c.decode_table());
        }
    }

    #[test]
    fn plans_variant_adds_step_machinery() {
        let c = compile_lambda_prime(&tower_task(true), CompileOptions::default()).unwrap();
        let d = c.domain();
        let p = c.problem();
        assert_eq!(c.max_plan_length(), 8);
        assert!(d.constants.contains_key("i9"));
        assert!(p.init.contains(&GroundAtom::new("plan_unstack", &["a", "b", "i1"])));
        assert!(p.init.contains(&GroundAtom::new("at_step", &["i1"])));
        let validate = &d.actions["validate_1"];
        assert!(validate
            .precondition
            .contains(&Precondition::Lit(Literal::pos(Atom::new("at_step", vec![Term::constant("i9")])))));
        assert_eq!(c.plan_length_bound(), 64 + 8 + 1);
    }

    #[test]
    fn complete_partial_model_removes_programming() {
        let schemas = blocksworld_schemas();
        let stack = schemas.iter().find(|s| s.name == "stack").unwrap();
        let mut pm = PartialModel::new();
        pm.insert("stack".into(), KnownSchema::from_schema(stack, true));
        let mut task = tower_task(false);
        task.partial_model = Some(pm);
        let c = compile_lambda(&task, CompileOptions::default()).unwrap();
        let d = c.domain();
        assert!(!d.actions.keys().any(|n| n.starts_with("program_") && n.contains("_stack")));
        let p = c.problem();
        for atom in &c.hypothesis.atoms["stack"] {
            let has = p.init.contains(&GroundAtom::new(&CompiledTask::pre_fluent("stack", atom), &[]));
            assert_eq!(has, stack.pre.contains(atom), "{atom}");
        }
        assert!(p.init.contains(&GroundAtom::new("add_on_stack_v1_v2", &[])));
        assert!(p.init.contains(&GroundAtom::new("del_holding_stack_v1", &[])));
    }

    #[test]
    fn partial_model_outside_hypothesis_is_rejected() {
        let mut pm = PartialModel::new();
        let mut k = KnownSchema::default();
        k.pre.insert(Atom::vars("on", &["v1", "v3"]));
        pm.insert("stack".into(), k);
        let mut task = tower_task(false);
        task.partial_model = Some(pm);
        assert!(matches!(
            compile_lambda(&task, CompileOptions::default()),
            Err(LearnError::OutsideHypothesis { .. })
        ));
    }

    #[test]
    fn symmetry_breaking_adds_locks() {
        let opts = CompileOptions {
            symmetry_breaking: true,
            ..Default::default()
        };
        let c = compile_lambda(&tower_task(false), opts).unwrap();
        let d = c.domain();
        assert!(d.predicates.contains_key("locked_0"));
        assert!(d.predicates.contains_key("locked_31"));
    }

    #[test]
    fn name_clashes_are_reported() {
        let d = parse_domain(
            "(define (domain x) (:requirements :strips) (:predicates (modeprog) (p ?a))
             (:action go :parameters (?a) :precondition (p ?a) :effect (not (p ?a))))",
        )
        .unwrap();
        let traces = parse_traces("(trace (:objects a) (:init (p a)) (:final))").unwrap();
        let t = LearningTask::new(&d, &traces, false, None).unwrap();
        assert!(matches!(
            compile_lambda(&t, CompileOptions::default()),
            Err(LearnError::NameClash(_))
        ));
    }
}
