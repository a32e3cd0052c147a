//! In-memory model of STRIPS domains extended with conditional effects and
//! binary disjunctive preconditions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ground::GroundAtom;

/// Root of every type tree. Untyped domains place all objects here.
pub const OBJECT_TYPE: &str = "object";

/// Built-in equality predicate; static and never learnable.
pub const EQUALITY: &str = "=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Requirement {
    Strips,
    Typing,
    Equality,
    NegativePreconditions,
    DisjunctivePreconditions,
    ConditionalEffects,
}

impl Requirement {
    pub fn parse(flag: &str) -> Option<Requirement> {
        Some(match flag.to_ascii_lowercase().as_str() {
            ":strips" => Requirement::Strips,
            ":typing" => Requirement::Typing,
            ":equality" => Requirement::Equality,
            ":negative-preconditions" => Requirement::NegativePreconditions,
            ":disjunctive-preconditions" => Requirement::DisjunctivePreconditions,
            ":conditional-effects" => Requirement::ConditionalEffects,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Requirement::Strips => ":strips",
            Requirement::Typing => ":typing",
            Requirement::Equality => ":equality",
            Requirement::NegativePreconditions => ":negative-preconditions",
            Requirement::DisjunctivePreconditions => ":disjunctive-preconditions",
            Requirement::ConditionalEffects => ":conditional-effects",
        }
    }
}

/// Single-inheritance type tree rooted at [`OBJECT_TYPE`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeHierarchy {
    parents: BTreeMap<String, String>,
}

impl TypeHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `ty` as a direct subtype of `parent`. Redeclaration overwrites.
    pub fn declare(&mut self, ty: &str, parent: &str) {
        if ty != OBJECT_TYPE {
            self.parents.insert(ty.to_string(), parent.to_string());
        }
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == OBJECT_TYPE || self.parents.contains_key(ty)
    }

    pub fn parent(&self, ty: &str) -> Option<&str> {
        self.parents.get(ty).map(String::as_str)
    }

    /// Declared types other than the root, with their parents.
    pub fn declared(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents.iter().map(|(t, p)| (t.as_str(), p.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// True when `sub` equals `sup` or descends from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == OBJECT_TYPE {
            return true;
        }
        let mut cur = sub;
        // bounded walk guards against cyclic declarations
        for _ in 0..=self.parents.len() {
            if cur == sup {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    /// Two types can share an object when one descends from the other.
    pub fn compatible(&self, a: &str, b: &str) -> bool {
        self.is_subtype(a, b) || self.is_subtype(b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredicateSignature {
    pub name: String,
    pub param_types: Vec<String>,
}

impl PredicateSignature {
    pub fn new(name: &str, param_types: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            param_types: param_types.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// Variable name without the leading `?`.
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(name.to_string())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Self {
            predicate: predicate.to_string(),
            args,
        }
    }

    /// Atom over variables only, e.g. `Atom::vars("on", &["v1", "v2"])`.
    pub fn vars(predicate: &str, vars: &[&str]) -> Self {
        Self::new(predicate, vars.iter().map(|v| Term::var(v)).collect())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    pub fn is_equality(&self) -> bool {
        self.predicate == EQUALITY
    }

    /// Substitutes variables through `binding`; unbound variables are an error
    /// reported as `None`.
    pub fn ground(&self, binding: &dyn Fn(&str) -> Option<String>) -> Option<GroundAtom> {
        let mut args = Vec::with_capacity(self.args.len());
        for t in &self.args {
            args.push(match t {
                Term::Var(v) => binding(v)?,
                Term::Const(c) => c.clone(),
            });
        }
        Some(GroundAtom {
            predicate: self.predicate.clone(),
            args,
        })
    }

    pub fn rename_vars(&self, map: &BTreeMap<String, String>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
                    c => c.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Self {
            atom,
            positive: false,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            atom: self.atom.clone(),
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

/// A precondition conjunct: a literal, or a binary disjunction. Implications
/// `a -> b` are stored as `Or(not a, b)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Precondition {
    Lit(Literal),
    Or(Literal, Literal),
}

impl Precondition {
    pub fn implies(antecedent: Literal, consequent: Literal) -> Self {
        Precondition::Or(antecedent.negated(), consequent)
    }

    pub fn literals(&self) -> Vec<&Literal> {
        match self {
            Precondition::Lit(l) => vec![l],
            Precondition::Or(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precondition::Lit(l) => write!(f, "{l}"),
            Precondition::Or(a, b) => write!(f, "(or {a} {b})"),
        }
    }
}

/// `condition ▷ effect`; an empty condition is an unconditional effect.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CondEffect {
    pub condition: BTreeSet<Literal>,
    pub effect: BTreeSet<Literal>,
}

impl CondEffect {
    pub fn new(
        condition: impl IntoIterator<Item = Literal>,
        effect: impl IntoIterator<Item = Literal>,
    ) -> Self {
        Self {
            condition: condition.into_iter().collect(),
            effect: effect.into_iter().collect(),
        }
    }

    pub fn unconditional(effect: impl IntoIterator<Item = Literal>) -> Self {
        Self::new([], effect)
    }

    /// An atom occurring with both polarities in the effect set.
    pub fn conflicting_atom(&self) -> Option<&Atom> {
        self.effect
            .iter()
            .filter(|l| l.positive)
            .map(|l| &l.atom)
            .find(|a| self.effect.contains(&Literal::neg((*a).clone())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

impl Param {
    pub fn new(name: &str, ty: &str) -> Self {
        Self {
            name: name.to_string(),
            ty: ty.to_string(),
        }
    }
}

/// Lifted action with conditional effects. Plain STRIPS actions are the
/// special case of one unconditional effect and positive literal preconditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub name: String,
    pub params: Vec<Param>,
    pub precondition: BTreeSet<Precondition>,
    pub effects: BTreeSet<CondEffect>,
    /// Set by a `;; @complete` annotation in partial-model files.
    pub complete: bool,
}

impl Action {
    pub fn new(name: &str, params: Vec<Param>) -> Self {
        Self {
            name: name.to_string(),
            params,
            precondition: BTreeSet::new(),
            effects: BTreeSet::new(),
            complete: false,
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn implication_count(&self) -> usize {
        self.precondition
            .iter()
            .filter(|p| matches!(p, Precondition::Or(..)))
            .count()
    }

    /// Conditional effects whose condition is non-empty.
    pub fn conditional_effect_count(&self) -> usize {
        self.effects.iter().filter(|e| !e.condition.is_empty()).count()
    }
}

/// Lifted STRIPS operator: `pre`, `add` and `del` are atoms over `params`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperatorSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub pre: BTreeSet<Atom>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
}

/// Which well-formedness rule an operator schema breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaViolation {
    DelNotInPre(Atom),
    AddAndDel(Atom),
    PreAndAdd(Atom),
    UnboundVariable(String),
}

impl OperatorSchema {
    pub fn new(name: &str, params: Vec<Param>) -> Self {
        Self {
            name: name.to_string(),
            params,
            pre: BTreeSet::new(),
            add: BTreeSet::new(),
            del: BTreeSet::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_types(&self) -> Vec<String> {
        self.params.iter().map(|p| p.ty.clone()).collect()
    }

    /// Renames parameters positionally to `v1..vn`, the variable-name objects
    /// the learner works with.
    pub fn canonical(&self) -> OperatorSchema {
        let map: BTreeMap<String, String> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), variable_name(i)))
            .collect();
        let rename = |set: &BTreeSet<Atom>| set.iter().map(|a| a.rename_vars(&map)).collect();
        OperatorSchema {
            name: self.name.clone(),
            params: self
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| Param::new(&variable_name(i), &p.ty))
                .collect(),
            pre: rename(&self.pre),
            add: rename(&self.add),
            del: rename(&self.del),
        }
    }

    /// Checks `del ⊆ pre`, `del ∩ add = ∅`, `pre ∩ add = ∅` and that atoms
    /// only use declared parameters.
    pub fn violations(&self) -> Vec<SchemaViolation> {
        let mut out = Vec::new();
        for a in &self.del {
            if !self.pre.contains(a) {
                out.push(SchemaViolation::DelNotInPre(a.clone()));
            }
            if self.add.contains(a) {
                out.push(SchemaViolation::AddAndDel(a.clone()));
            }
        }
        for a in &self.add {
            if self.pre.contains(a) {
                out.push(SchemaViolation::PreAndAdd(a.clone()));
            }
        }
        let names: BTreeSet<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        for a in self.pre.iter().chain(&self.add).chain(&self.del) {
            for v in a.variables() {
                if !names.contains(v) {
                    out.push(SchemaViolation::UnboundVariable(v.to_string()));
                }
            }
        }
        out
    }

    pub fn is_well_formed(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn to_action(&self) -> Action {
        let mut action = Action::new(&self.name, self.params.clone());
        action.precondition = self
            .pre
            .iter()
            .map(|a| Precondition::Lit(Literal::pos(a.clone())))
            .collect();
        let effect: BTreeSet<Literal> = self
            .del
            .iter()
            .map(|a| Literal::neg(a.clone()))
            .chain(self.add.iter().map(|a| Literal::pos(a.clone())))
            .collect();
        if !effect.is_empty() {
            action.effects.insert(CondEffect {
                condition: BTreeSet::new(),
                effect,
            });
        }
        action
    }

    /// Reads a STRIPS action back as a schema; `None` when the action uses
    /// negation in preconditions, disjunctions or conditional effects.
    pub fn from_action(action: &Action) -> Option<OperatorSchema> {
        let mut schema = OperatorSchema::new(&action.name, action.params.clone());
        for p in &action.precondition {
            match p {
                Precondition::Lit(l) if l.positive && !l.atom.is_equality() => {
                    schema.pre.insert(l.atom.clone());
                }
                _ => return None,
            }
        }
        for e in &action.effects {
            if !e.condition.is_empty() {
                return None;
            }
            for l in &e.effect {
                if l.positive {
                    schema.add.insert(l.atom.clone());
                } else {
                    schema.del.insert(l.atom.clone());
                }
            }
        }
        Some(schema)
    }
}

/// `v1`, `v2`, ... for zero-based index `i`.
pub fn variable_name(i: usize) -> String {
    format!("v{}", i + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Domain {
    pub name: String,
    pub requirements: BTreeSet<Requirement>,
    pub types: TypeHierarchy,
    /// Constant name to type.
    pub constants: BTreeMap<String, String>,
    pub predicates: BTreeMap<String, PredicateSignature>,
    pub actions: BTreeMap<String, Action>,
}

impl Domain {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn typed(&self) -> bool {
        self.requirements.contains(&Requirement::Typing) || !self.types.is_empty()
    }

    pub fn add_predicate(&mut self, sig: PredicateSignature) {
        self.predicates.insert(sig.name.clone(), sig);
    }

    pub fn add_action(&mut self, action: Action) {
        self.actions.insert(action.name.clone(), action);
    }

    /// All actions as STRIPS schemas, or the name of the first one that is not.
    pub fn strips_schemas(&self) -> Result<Vec<OperatorSchema>, String> {
        self.actions
            .values()
            .map(|a| OperatorSchema::from_action(a).ok_or_else(|| a.name.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    /// Object name to type.
    pub objects: BTreeMap<String, String>,
    pub init: BTreeSet<GroundAtom>,
    pub goal: BTreeSet<super::ground::GroundLiteral>,
}

impl Problem {
    pub fn new(name: &str, domain: &str) -> Self {
        Self {
            name: name.to_string(),
            domain: domain.to_string(),
            ..Default::default()
        }
    }
}
