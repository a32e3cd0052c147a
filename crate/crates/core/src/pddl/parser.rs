//! Domain, problem and plan-file readers.

use std::collections::{BTreeMap, BTreeSet};

use super::ground::{GroundAtom, GroundLiteral, Plan, PlanStep};
use super::sexpr::{read_all, Pos, SExpr};
use super::types::*;
use super::PddlError;

type Result<T> = std::result::Result<T, PddlError>;

fn read(text: &str) -> Result<Vec<SExpr>> {
    read_all(text).map_err(|e| PddlError::syntax(e.pos, e.message))
}

fn symbol(e: &SExpr) -> Result<String> {
    e.as_symbol()
        .map(str::to_ascii_lowercase)
        .ok_or_else(|| PddlError::syntax(e.pos(), "expected a name, found a list"))
}

fn list(e: &SExpr) -> Result<&[SExpr]> {
    e.as_list()
        .ok_or_else(|| PddlError::syntax(e.pos(), "expected a list"))
}

/// Splits the `define` header: `(define (<kind> NAME) rest...)`.
fn define_body<'a>(exprs: &'a [SExpr], kind: &str) -> Result<(String, &'a [SExpr])> {
    let top = match exprs {
        [one] => one,
        [] => return Err(PddlError::syntax(Pos { line: 1, col: 1 }, "empty input")),
        [_, extra, ..] => return Err(PddlError::syntax(extra.pos(), "trailing input after definition")),
    };
    let items = list(top)?;
    if items.first().and_then(SExpr::as_symbol).map(str::to_ascii_lowercase).as_deref() != Some("define") {
        return Err(PddlError::syntax(top.pos(), "expected (define ...)"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| PddlError::syntax(top.pos(), format!("missing ({kind} NAME)")))?;
    let h = list(header)?;
    if h.len() != 2 || symbol(&h[0])? != kind {
        return Err(PddlError::syntax(header.pos(), format!("expected ({kind} NAME)")));
    }
    Ok((symbol(&h[1])?, &items[2..]))
}

/// `a b - t c - u d` into `[(a,t),(b,t),(c,u),(d,object)]`.
fn typed_list(items: &[SExpr]) -> Result<Vec<(String, String, Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        if item.as_symbol() == Some("-") {
            let ty_expr = items
                .get(i + 1)
                .ok_or_else(|| PddlError::syntax(item.pos(), "missing type after '-'"))?;
            if ty_expr.as_list().is_some() {
                return Err(PddlError::Unsupported {
                    feature: "either".into(),
                    pos: ty_expr.pos(),
                });
            }
            let ty = symbol(ty_expr)?;
            if pending.is_empty() {
                return Err(PddlError::syntax(item.pos(), "type without names"));
            }
            for (n, p) in pending.drain(..) {
                out.push((n, ty.clone(), p));
            }
            i += 2;
        } else {
            pending.push((symbol(item)?, item.pos()));
            i += 1;
        }
    }
    for (n, p) in pending {
        out.push((n, OBJECT_TYPE.to_string(), p));
    }
    Ok(out)
}

struct DomainScope<'a> {
    domain: &'a Domain,
    params: BTreeMap<String, String>,
}

impl DomainScope<'_> {
    fn check_type(&self, ty: &str, pos: Pos) -> Result<()> {
        if self.domain.types.contains(ty) {
            Ok(())
        } else {
            Err(PddlError::UnknownType {
                name: ty.to_string(),
                pos,
            })
        }
    }

    fn term(&self, e: &SExpr) -> Result<(Term, String)> {
        let s = symbol(e)?;
        if let Some(v) = s.strip_prefix('?') {
            let ty = self
                .params
                .get(v)
                .ok_or_else(|| PddlError::syntax(e.pos(), format!("unbound variable ?{v}")))?;
            Ok((Term::Var(v.to_string()), ty.clone()))
        } else {
            let ty = self
                .domain
                .constants
                .get(&s)
                .cloned()
                .unwrap_or_else(|| OBJECT_TYPE.to_string());
            Ok((Term::Const(s), ty))
        }
    }

    fn atom(&self, e: &SExpr) -> Result<Atom> {
        let items = list(e)?;
        let head = items
            .first()
            .ok_or_else(|| PddlError::syntax(e.pos(), "empty atom"))?;
        let name = symbol(head)?;
        let mut args = Vec::new();
        let mut types = Vec::new();
        for a in &items[1..] {
            let (t, ty) = self.term(a)?;
            args.push(t);
            types.push((ty, a.pos()));
        }
        if name == EQUALITY {
            if args.len() != 2 {
                return Err(PddlError::ArityMismatch {
                    predicate: name,
                    expected: 2,
                    found: args.len(),
                    pos: e.pos(),
                });
            }
            return Ok(Atom { predicate: name, args });
        }
        let sig = self
            .domain
            .predicates
            .get(&name)
            .ok_or_else(|| PddlError::UnknownPredicate {
                name: name.clone(),
                pos: head.pos(),
            })?;
        if sig.arity() != args.len() {
            return Err(PddlError::ArityMismatch {
                predicate: name,
                expected: sig.arity(),
                found: args.len(),
                pos: e.pos(),
            });
        }
        for ((ty, pos), expected) in types.iter().zip(&sig.param_types) {
            if !self.domain.types.compatible(ty, expected) {
                return Err(PddlError::Semantic(format!(
                    "argument of type {ty} does not fit {expected} in {name} at {pos}"
                )));
            }
        }
        Ok(Atom { predicate: name, args })
    }

    fn literal(&self, e: &SExpr) -> Result<Literal> {
        if e.head().as_deref() == Some("not") {
            let items = list(e)?;
            if items.len() != 2 {
                return Err(PddlError::syntax(e.pos(), "(not ...) takes one atom"));
            }
            Ok(Literal::neg(self.atom(&items[1])?))
        } else {
            Ok(Literal::pos(self.atom(e)?))
        }
    }

    fn conjunction<'e>(&self, e: &'e SExpr) -> Result<Vec<&'e SExpr>> {
        match e.head().as_deref() {
            Some("and") => Ok(list(e)?[1..].iter().collect()),
            None if list(e)?.is_empty() => Ok(vec![]),
            _ => Ok(vec![e]),
        }
    }

    fn precondition(&self, e: &SExpr) -> Result<BTreeSet<Precondition>> {
        let mut out = BTreeSet::new();
        for c in self.conjunction(e)? {
            match c.head().as_deref() {
                Some("and") => out.extend(self.precondition(c)?),
                Some("or") => {
                    let items = list(c)?;
                    if items.len() != 3 {
                        return Err(PddlError::Unsupported {
                            feature: "disjunction of other than two literals".into(),
                            pos: c.pos(),
                        });
                    }
                    out.insert(Precondition::Or(self.literal(&items[1])?, self.literal(&items[2])?));
                }
                Some("imply") => {
                    let items = list(c)?;
                    if items.len() != 3 {
                        return Err(PddlError::syntax(c.pos(), "(imply A B) takes two literals"));
                    }
                    out.insert(Precondition::implies(self.literal(&items[1])?, self.literal(&items[2])?));
                }
                Some(q @ ("forall" | "exists" | "when")) => {
                    return Err(PddlError::Unsupported {
                        feature: q.to_string(),
                        pos: c.pos(),
                    })
                }
                _ => {
                    out.insert(Precondition::Lit(self.literal(c)?));
                }
            }
        }
        Ok(out)
    }

    fn literal_set(&self, e: &SExpr) -> Result<BTreeSet<Literal>> {
        let mut out = BTreeSet::new();
        for c in self.conjunction(e)? {
            match c.head().as_deref() {
                Some("and") => out.extend(self.literal_set(c)?),
                Some(q @ ("when" | "forall" | "or" | "increase" | "decrease")) => {
                    return Err(PddlError::Unsupported {
                        feature: q.to_string(),
                        pos: c.pos(),
                    })
                }
                _ => {
                    out.insert(self.literal(c)?);
                }
            }
        }
        Ok(out)
    }

    fn effects(&self, e: &SExpr) -> Result<BTreeSet<CondEffect>> {
        let mut unconditional = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut stack: Vec<&SExpr> = self.conjunction(e)?;
        stack.reverse();
        while let Some(c) = stack.pop() {
            match c.head().as_deref() {
                Some("and") => {
                    let mut inner = self.conjunction(c)?;
                    inner.reverse();
                    stack.extend(inner);
                }
                Some("when") => {
                    let items = list(c)?;
                    if items.len() != 3 {
                        return Err(PddlError::syntax(c.pos(), "(when C E) takes a condition and an effect"));
                    }
                    let effect = CondEffect {
                        condition: self.literal_set(&items[1])?,
                        effect: self.literal_set(&items[2])?,
                    };
                    if let Some(a) = effect.conflicting_atom() {
                        return Err(PddlError::Semantic(format!(
                            "conditional effect at {} both adds and deletes {a}",
                            c.pos()
                        )));
                    }
                    out.insert(effect);
                }
                Some(q @ ("forall" | "increase" | "decrease" | "assign")) => {
                    return Err(PddlError::Unsupported {
                        feature: q.to_string(),
                        pos: c.pos(),
                    })
                }
                _ => {
                    unconditional.insert(self.literal(c)?);
                }
            }
        }
        if !unconditional.is_empty() {
            let effect = CondEffect {
                condition: BTreeSet::new(),
                effect: unconditional,
            };
            if let Some(a) = effect.conflicting_atom() {
                return Err(PddlError::Semantic(format!("effect both adds and deletes {a}")));
            }
            out.insert(effect);
        }
        Ok(out)
    }
}

fn parse_action(domain: &Domain, e: &SExpr) -> Result<Action> {
    let items = list(e)?;
    let name_expr = items
        .get(1)
        .ok_or_else(|| PddlError::syntax(e.pos(), "action without a name"))?;
    let name = symbol(name_expr)?;
    let mut scope = DomainScope {
        domain,
        params: BTreeMap::new(),
    };
    let mut action = Action::new(&name, vec![]);
    action.complete = e.annotations_deep().iter().any(|a| a == "complete");
    let mut i = 2;
    let mut pre_expr = None;
    let mut eff_expr = None;
    while i < items.len() {
        let key = symbol(&items[i])?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| PddlError::syntax(items[i].pos(), format!("{key} without a value")))?;
        match key.as_str() {
            ":parameters" => {
                for (n, ty, pos) in typed_list(list(value)?)? {
                    let n = n
                        .strip_prefix('?')
                        .ok_or_else(|| PddlError::syntax(pos, "parameters must start with '?'"))?
                        .to_string();
                    scope.check_type(&ty, pos)?;
                    if scope.params.insert(n.clone(), ty.clone()).is_some() {
                        return Err(PddlError::syntax(pos, format!("duplicate parameter ?{n}")));
                    }
                    action.params.push(Param { name: n, ty });
                }
            }
            ":precondition" => pre_expr = Some(value),
            ":effect" => eff_expr = Some(value),
            other => {
                return Err(PddlError::Unsupported {
                    feature: other.to_string(),
                    pos: items[i].pos(),
                })
            }
        }
        i += 2;
    }
    if let Some(p) = pre_expr {
        action.precondition = scope.precondition(p)?;
    }
    if let Some(ef) = eff_expr {
        action.effects = scope.effects(ef)?;
    }
    Ok(action)
}

/// Parses a domain file.
pub fn parse_domain(text: &str) -> Result<Domain> {
    let exprs = read(text)?;
    let (name, sections) = define_body(&exprs, "domain")?;
    let mut domain = Domain::new(&name);
    let mut actions = Vec::new();
    for section in sections {
        let items = list(section)?;
        let key = section
            .head()
            .ok_or_else(|| PddlError::syntax(section.pos(), "expected a section"))?;
        match key.as_str() {
            ":requirements" => {
                for r in &items[1..] {
                    let flag = symbol(r)?;
                    let req = Requirement::parse(&flag).ok_or(PddlError::UnsupportedRequirement {
                        flag,
                        pos: r.pos(),
                    })?;
                    domain.requirements.insert(req);
                }
            }
            ":types" => {
                let declared = typed_list(&items[1..])?;
                for (t, parent, _) in &declared {
                    domain.types.declare(t, parent);
                }
                for (_, parent, pos) in &declared {
                    if !domain.types.contains(parent) {
                        return Err(PddlError::UnknownType {
                            name: parent.clone(),
                            pos: *pos,
                        });
                    }
                }
            }
            ":constants" => {
                for (c, ty, pos) in typed_list(&items[1..])? {
                    if !domain.types.contains(&ty) {
                        return Err(PddlError::UnknownType { name: ty, pos });
                    }
                    domain.constants.insert(c, ty);
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let pitems = list(p)?;
                    let pname = symbol(
                        pitems
                            .first()
                            .ok_or_else(|| PddlError::syntax(p.pos(), "empty predicate"))?,
                    )?;
                    let mut param_types = Vec::new();
                    for (_, ty, pos) in typed_list(&pitems[1..])? {
                        if !domain.types.contains(&ty) {
                            return Err(PddlError::UnknownType { name: ty, pos });
                        }
                        param_types.push(ty);
                    }
                    if domain.predicates.contains_key(&pname) {
                        return Err(PddlError::syntax(p.pos(), format!("duplicate predicate {pname}")));
                    }
                    domain.add_predicate(PredicateSignature {
                        name: pname,
                        param_types,
                    });
                }
            }
            ":action" => actions.push(section),
            other => {
                return Err(PddlError::Unsupported {
                    feature: other.to_string(),
                    pos: section.pos(),
                })
            }
        }
    }
    for a in actions {
        let action = parse_action(&domain, a)?;
        if domain.actions.contains_key(&action.name) {
            return Err(PddlError::syntax(a.pos(), format!("duplicate action {}", action.name)));
        }
        domain.add_action(action);
    }
    Ok(domain)
}

fn ground_atom(e: &SExpr) -> Result<GroundAtom> {
    let items = list(e)?;
    let head = items
        .first()
        .ok_or_else(|| PddlError::syntax(e.pos(), "empty atom"))?;
    let mut args = Vec::new();
    for a in &items[1..] {
        let s = symbol(a)?;
        if s.starts_with('?') {
            return Err(PddlError::syntax(a.pos(), "variables are not allowed in ground atoms"));
        }
        args.push(s);
    }
    Ok(GroundAtom {
        predicate: symbol(head)?,
        args,
    })
}

/// Ground literal `(p a b)` or `(not (p a b))`.
pub(crate) fn ground_literal(e: &SExpr) -> Result<GroundLiteral> {
    if e.head().as_deref() == Some("not") {
        let items = list(e)?;
        if items.len() != 2 {
            return Err(PddlError::syntax(e.pos(), "(not ...) takes one atom"));
        }
        Ok(GroundLiteral::neg(ground_atom(&items[1])?))
    } else {
        Ok(GroundLiteral::pos(ground_atom(e)?))
    }
}

/// Reads a whitespace list of ground atoms (the body of `:init`, `:final`, ...).
pub(crate) fn ground_atoms(items: &[SExpr]) -> Result<Vec<GroundAtom>> {
    items.iter().map(ground_atom).collect()
}

pub(crate) fn typed_objects(items: &[SExpr]) -> Result<BTreeMap<String, String>> {
    Ok(typed_list(items)?.into_iter().map(|(n, t, _)| (n, t)).collect())
}

/// Parses a problem file. Predicates and objects are checked against a domain
/// separately by [`check_problem`].
pub fn parse_problem(text: &str) -> Result<Problem> {
    let exprs = read(text)?;
    let (name, sections) = define_body(&exprs, "problem")?;
    let mut problem = Problem::new(&name, "");
    for section in sections {
        let items = list(section)?;
        let key = section
            .head()
            .ok_or_else(|| PddlError::syntax(section.pos(), "expected a section"))?;
        match key.as_str() {
            ":domain" => {
                problem.domain = symbol(
                    items
                        .get(1)
                        .ok_or_else(|| PddlError::syntax(section.pos(), "missing domain name"))?,
                )?
            }
            ":objects" => problem.objects = typed_objects(&items[1..])?,
            ":init" => problem.init = ground_atoms(&items[1..])?.into_iter().collect(),
            ":goal" => {
                let g = items
                    .get(1)
                    .ok_or_else(|| PddlError::syntax(section.pos(), "empty goal"))?;
                let conj: Vec<&SExpr> = if g.head().as_deref() == Some("and") {
                    list(g)?[1..].iter().collect()
                } else {
                    vec![g]
                };
                for c in conj {
                    problem.goal.insert(ground_literal(c)?);
                }
            }
            ":requirements" => {}
            other => {
                return Err(PddlError::Unsupported {
                    feature: other.to_string(),
                    pos: section.pos(),
                })
            }
        }
    }
    Ok(problem)
}

/// Checks object types, predicate names and arities of a problem against its domain.
pub fn check_problem(domain: &Domain, problem: &Problem) -> Result<()> {
    let no_pos = Pos::default();
    for ty in problem.objects.values() {
        if !domain.types.contains(ty) {
            return Err(PddlError::UnknownType {
                name: ty.clone(),
                pos: no_pos,
            });
        }
    }
    let atoms = problem
        .init
        .iter()
        .chain(problem.goal.iter().map(|l| &l.atom));
    for a in atoms {
        if a.predicate == EQUALITY {
            continue;
        }
        let sig = domain
            .predicates
            .get(&a.predicate)
            .ok_or_else(|| PddlError::UnknownPredicate {
                name: a.predicate.clone(),
                pos: no_pos,
            })?;
        if sig.arity() != a.args.len() {
            return Err(PddlError::ArityMismatch {
                predicate: a.predicate.clone(),
                expected: sig.arity(),
                found: a.args.len(),
                pos: no_pos,
            });
        }
        for o in &a.args {
            if !problem.objects.contains_key(o) && !domain.constants.contains_key(o) {
                return Err(PddlError::Semantic(format!("undeclared object {o} in {a}")));
            }
        }
    }
    Ok(())
}

/// Parses a plan file: one `(name arg ...)` per line; text after `;` is
/// ignored, as is anything outside the parentheses (step numbers, costs).
pub fn parse_plan(text: &str) -> Result<Plan> {
    let mut steps = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("");
        let Some(open) = line.find('(') else {
            continue;
        };
        let close = line[open..]
            .find(')')
            .map(|c| c + open)
            .ok_or_else(|| {
                PddlError::syntax(
                    Pos {
                        line: lineno + 1,
                        col: open + 1,
                    },
                    "unclosed plan step",
                )
            })?;
        let mut words = line[open + 1..close].split_whitespace().map(str::to_ascii_lowercase);
        let name = words.next().ok_or_else(|| {
            PddlError::syntax(
                Pos {
                    line: lineno + 1,
                    col: open + 1,
                },
                "empty plan step",
            )
        })?;
        steps.push(PlanStep {
            name,
            args: words.collect(),
        });
    }
    Ok(Plan { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    const STACK: &str = "(define (domain bw) (:requirements :strips)
      (:predicates (handempty) (holding ?o - object) (clear ?o - object)
                   (ontable ?o - object) (on ?o1 - object ?o2 - object))
      (:action stack
        :parameters (?v1 ?v2 - object)
        :precondition (and (holding ?v1) (clear ?v2))
        :effect (and (not (holding ?v1))
                     (not (clear ?v2))
                     (handempty) (clear ?v1)
                     (on ?v1 ?v2))))";

    #[test]
    fn parses_stack_schema() {
        let d = parse_domain(STACK).unwrap();
        let s = OperatorSchema::from_action(&d.actions["stack"]).unwrap();
        assert_eq!(s.params, vec![Param::new("v1", "object"), Param::new("v2", "object")]);
        let set = |atoms: Vec<Atom>| atoms.into_iter().collect::<BTreeSet<_>>();
        assert_eq!(s.pre, set(vec![Atom::vars("holding", &["v1"]), Atom::vars("clear", &["v2"])]));
        assert_eq!(s.del, s.pre);
        assert_eq!(
            s.add,
            set(vec![
                Atom::vars("handempty", &[]),
                Atom::vars("clear", &["v1"]),
                Atom::vars("on", &["v1", "v2"])
            ])
        );
    }

    #[test]
    fn empty_domain_with_one_predicate() {
        let d = parse_domain("(define (domain e) (:predicates (p)))").unwrap();
        assert!(d.actions.is_empty());
        assert_eq!(d.predicates.len(), 1);
    }

    #[test]
    fn identifiers_are_lowercased() {
        let d = parse_domain("(define (DOMAIN E) (:PREDICATES (P ?X)) (:action A :parameters (?X) :precondition (P ?x)))").unwrap();
        assert_eq!(d.name, "e");
        assert!(d.predicates.contains_key("p"));
        assert!(d.actions.contains_key("a"));
    }

    #[test]
    fn reports_errors_with_positions() {
        let err = parse_domain("(define (domain e)\n (:requirements :fluents))").unwrap_err();
        assert!(matches!(err, PddlError::UnsupportedRequirement { pos: Pos { line: 2, col: 17 }, .. }));
        let err = parse_domain("(define (domain e) (:predicates (p ?x))\n (:action a :parameters (?x) :precondition (p ?x ?x)))").unwrap_err();
        assert!(matches!(err, PddlError::ArityMismatch { expected: 1, found: 2, .. }));
        let err = parse_domain("(define (domain e) (:predicates (p ?x - thing)))").unwrap_err();
        assert!(matches!(err, PddlError::UnknownType { .. }));
        let err = parse_domain("(define (domain e) (:predicates (p ?x))").unwrap_err();
        assert!(matches!(err, PddlError::Syntax { .. }));
    }

    #[test]
    fn typed_hierarchy_and_constants() {
        let d = parse_domain(
            "(define (domain t) (:requirements :typing)
              (:types truck - vehicle vehicle place)
              (:constants depot - place)
              (:predicates (at ?v - vehicle ?p - place))
              (:action go :parameters (?t - truck) :precondition (at ?t depot)))",
        )
        .unwrap();
        assert!(d.types.is_subtype("truck", "vehicle"));
        assert!(d.types.is_subtype("truck", OBJECT_TYPE));
        assert!(!d.types.is_subtype("vehicle", "truck"));
        assert_eq!(d.constants["depot"], "place");
    }

    #[test]
    fn disjunctions_and_conditional_effects() {
        let d = parse_domain(
            "(define (domain c) (:requirements :conditional-effects :disjunctive-preconditions :negative-preconditions)
              (:predicates (a) (b ?x) (c))
              (:action act :parameters (?x)
                :precondition (and (or (not (a)) (b ?x)) (not (c)))
                :effect (and (when (a) (not (b ?x))) (c))))",
        )
        .unwrap();
        let a = &d.actions["act"];
        assert_eq!(a.implication_count(), 1);
        assert_eq!(a.conditional_effect_count(), 1);
        assert_eq!(a.effects.len(), 2);
    }

    #[test]
    fn plan_file_ignores_comments_and_step_numbers() {
        let p = parse_plan("; cost = 2\n0: (Unstack A B)\n\n1 : (putdown a) ; done\n").unwrap();
        assert_eq!(p.steps, vec![PlanStep::new("unstack", &["a", "b"]), PlanStep::new("putdown", &["a"])]);
    }

    #[test]
    fn problem_parses_and_checks() {
        let d = parse_domain(STACK).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain bw) (:objects a b)
              (:init (holding a) (clear b)) (:goal (and (on a b) (not (holding a)))))",
        )
        .unwrap();
        assert_eq!(p.init.len(), 2);
        assert_eq!(p.goal.len(), 2);
        check_problem(&d, &p).unwrap();
        let bad = parse_problem("(define (problem p) (:domain bw) (:objects a) (:init (on a)) (:goal (handempty)))").unwrap();
        assert!(matches!(check_problem(&d, &bad), Err(PddlError::ArityMismatch { .. })));
    }
}
