//! Deterministic PDDL writers. Output is byte-stable: sections and items are
//! emitted in lexicographic order.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::ground::Plan;
use super::types::*;

fn typed_names<'a>(items: impl Iterator<Item = (&'a str, &'a str)>, typed: bool) -> String {
    let items: Vec<(&str, &str)> = items.collect();
    if !typed {
        return items.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(" ");
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let ty = items[i].1;
        let mut j = i;
        while j < items.len() && items[j].1 == ty {
            out.push(items[j].0.to_string());
            j += 1;
        }
        out.push(format!("- {ty}"));
        i = j;
    }
    out.join(" ")
}

/// Objects grouped by type, types in lexicographic order.
fn grouped_objects(objects: &BTreeMap<String, String>, typed: bool) -> String {
    let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (o, t) in objects {
        by_type.entry(t).or_default().push(o);
    }
    let pairs = by_type
        .iter()
        .flat_map(|(t, os)| os.iter().map(move |o| (*o, *t)));
    typed_names(pairs, typed)
}

fn conjunction(out: &mut String, items: &[String], indent: &str) {
    match items {
        [] => out.push_str("(and)"),
        [one] => out.push_str(one),
        _ => {
            out.push_str("(and ");
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    out.push_str(indent);
                    out.push_str("     ");
                }
                out.push_str(item);
            }
            out.push(')');
        }
    }
}

fn literal_group(lits: &std::collections::BTreeSet<Literal>) -> String {
    let parts: Vec<String> = lits.iter().map(|l| l.to_string()).collect();
    if parts.len() == 1 {
        parts[0].clone()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

fn print_action(out: &mut String, a: &Action, typed: bool) {
    if a.complete {
        out.push_str("  ;; @complete\n");
    }
    let _ = writeln!(out, "  (:action {}", a.name);
    let names: Vec<String> = a.params.iter().map(|p| format!("?{}", p.name)).collect();
    let params = typed_names(
        names.iter().map(String::as_str).zip(a.params.iter().map(|p| p.ty.as_str())),
        typed,
    );
    let _ = writeln!(out, "    :parameters ({params})");
    if !a.precondition.is_empty() {
        out.push_str("    :precondition ");
        let items: Vec<String> = a.precondition.iter().map(|p| p.to_string()).collect();
        conjunction(out, &items, "    ");
        out.push('\n');
    }
    out.push_str("    :effect ");
    let mut items: Vec<String> = Vec::new();
    for e in a.effects.iter().filter(|e| e.condition.is_empty()) {
        items.extend(e.effect.iter().map(|l| l.to_string()));
    }
    for e in a.effects.iter().filter(|e| !e.condition.is_empty()) {
        items.push(format!("(when {} {})", literal_group(&e.condition), literal_group(&e.effect)));
    }
    conjunction(out, &items, "    ");
    out.push_str(")\n");
}

/// Writes a domain file.
pub fn print_domain(d: &Domain) -> String {
    let typed = d.typed();
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let reqs: Vec<&str> = d.requirements.iter().map(|r| r.as_str()).collect();
        let _ = writeln!(out, "  (:requirements {})", reqs.join(" "));
    }
    if !d.types.is_empty() {
        let mut by_parent: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (t, p) in d.types.declared() {
            by_parent.entry(p).or_default().push(t);
        }
        let pairs = by_parent
            .iter()
            .flat_map(|(p, ts)| ts.iter().map(move |t| (*t, *p)));
        let _ = writeln!(out, "  (:types {})", typed_names(pairs, true));
    }
    if !d.constants.is_empty() {
        let _ = writeln!(out, "  (:constants {})", grouped_objects(&d.constants, typed));
    }
    out.push_str("  (:predicates");
    for p in d.predicates.values() {
        let vars: Vec<String> = (1..=p.arity()).map(|i| format!("?x{i}")).collect();
        let sig = typed_names(vars.iter().map(String::as_str).zip(p.param_types.iter().map(String::as_str)), typed);
        if sig.is_empty() {
            let _ = write!(out, "\n    ({})", p.name);
        } else {
            let _ = write!(out, "\n    ({} {})", p.name, sig);
        }
    }
    out.push_str(")\n");
    for a in d.actions.values() {
        print_action(&mut out, a, typed);
    }
    out.push_str(")\n");
    out
}

/// Writes a problem file.
pub fn print_problem(p: &Problem) -> String {
    let typed = p.objects.values().any(|t| t != OBJECT_TYPE);
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain);
    if !p.objects.is_empty() {
        let _ = writeln!(out, "  (:objects {})", grouped_objects(&p.objects, typed));
    }
    out.push_str("  (:init");
    for a in &p.init {
        let _ = write!(out, "\n    {a}");
    }
    out.push_str(")\n  (:goal ");
    let items: Vec<String> = p.goal.iter().map(|l| l.to_string()).collect();
    conjunction(&mut out, &items, "  ");
    out.push_str("))\n");
    out
}

/// One step per line.
pub fn print_plan(plan: &Plan) -> String {
    plan.to_string()
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_domain, parse_problem};
    use super::*;

    #[test]
    fn domain_round_trips() {
        let text = "(define (domain c) (:requirements :typing :conditional-effects :negative-preconditions :disjunctive-preconditions)
          (:types a b - object c - a)
          (:constants k - c)
          (:predicates (p ?x - a) (q) (r ?x - b ?y - c))
          ;; @complete
          (:action act :parameters (?x - a ?y - b ?z - c)
            :precondition (and (or (not (q)) (p ?x)) (not (r ?y ?z)) (p k))
            :effect (and (q) (not (p ?x)) (when (and (q) (p ?z)) (and (r ?y ?z) (not (q))))))
          (:action idle :parameters ()))";
        let d = parse_domain(text).unwrap();
        assert!(d.actions["act"].complete);
        let printed = print_domain(&d);
        let again = parse_domain(&printed).unwrap();
        assert_eq!(d, again);
        assert_eq!(printed, print_domain(&again));
    }

    #[test]
    fn problem_round_trips() {
        let p = parse_problem(
            "(define (problem x) (:domain c) (:objects o1 o2 - a o3 - b)
              (:init (p o1) (q)) (:goal (and (p o2) (not (q)))))",
        )
        .unwrap();
        assert_eq!(parse_problem(&print_problem(&p)).unwrap(), p);
    }
}
