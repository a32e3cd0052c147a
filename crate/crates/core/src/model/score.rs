//! Syntactic precision and recall of a learned model against a reference.

use std::collections::{BTreeMap, BTreeSet};

use crate::learn::PartialModel;
use crate::pddl::{Atom, OperatorSchema};

use super::ModelError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl Counts {
    /// tp / (tp + fp); 1 when both are zero.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// tp / (tp + fn); 1 when both are zero.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    fn add(&mut self, learned: &BTreeSet<Atom>, reference: &BTreeSet<Atom>) {
        self.tp += learned.intersection(reference).count() as u64;
        self.fp += learned.difference(reference).count() as u64;
        self.fn_ += reference.difference(learned).count() as u64;
    }

    pub fn plus(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    /// Skips schemas the partial model gives as complete.
    UnknownOnly,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelScore {
    pub pre: Counts,
    pub add: Counts,
    pub del: Counts,
    /// Schemas that were scored.
    pub schemas: Vec<String>,
}

impl ModelScore {
    /// Counts pooled over the three components.
    pub fn pooled(&self) -> Counts {
        self.pre.plus(self.add).plus(self.del)
    }

    pub fn precision(&self) -> f64 {
        self.pooled().precision()
    }

    pub fn recall(&self) -> f64 {
        self.pooled().recall()
    }

    /// Arithmetic mean of the per-component precisions.
    pub fn macro_precision(&self) -> f64 {
        (self.pre.precision() + self.add.precision() + self.del.precision()) / 3.0
    }

    pub fn macro_recall(&self) -> f64 {
        (self.pre.recall() + self.add.recall() + self.del.recall()) / 3.0
    }

    pub fn components(&self) -> [(&'static str, Counts); 3] {
        [("pre", self.pre), ("add", self.add), ("del", self.del)]
    }
}

/// Compares slots as exact atoms over `v1..vn`, after renaming both models'
/// parameters positionally.
pub fn score(
    learned: &[OperatorSchema],
    reference: &[OperatorSchema],
    scope: Scope,
    partial: Option<&PartialModel>,
) -> Result<ModelScore, ModelError> {
    let canon = |m: &[OperatorSchema]| -> BTreeMap<String, OperatorSchema> {
        m.iter().map(|s| (s.name.clone(), s.canonical())).collect()
    };
    let l = canon(learned);
    let r = canon(reference);
    if l.len() != learned.len() || r.len() != reference.len() {
        return Err(ModelError::NameMismatch("duplicate schema names".into()));
    }
    let ln: BTreeSet<&String> = l.keys().collect();
    let rn: BTreeSet<&String> = r.keys().collect();
    if ln != rn {
        let diff: Vec<&String> = ln.symmetric_difference(&rn).copied().collect();
        return Err(ModelError::NameMismatch(format!("{diff:?}")));
    }
    let mut out = ModelScore::default();
    for (name, ls) in &l {
        let complete = partial.and_then(|p| p.get(name)).is_some_and(|k| k.complete);
        if scope == Scope::UnknownOnly && complete {
            continue;
        }
        let rs = &r[name];
        out.pre.add(&ls.pre, &rs.pre);
        out.add.add(&ls.add, &rs.add);
        out.del.add(&ls.del, &rs.del);
        out.schemas.push(name.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::KnownSchema;
    use crate::pddl::fixtures::blocksworld_schemas;
    use crate::pddl::Term;

    fn atom(p: &str, vars: &[&str]) -> Atom {
        Atom::new(p, vars.iter().map(|v| Term::Var(v.to_string())).collect())
    }

    #[test]
    fn empty_counts_score_one() {
        let c = Counts::default();
        assert_eq!(c.precision(), 1.0);
        assert_eq!(c.recall(), 1.0);
    }

    #[test]
    fn reference_scores_perfectly() {
        let r = blocksworld_schemas();
        let s = score(&r, &r, Scope::All, None).unwrap();
        assert_eq!(s.precision(), 1.0);
        assert_eq!(s.recall(), 1.0);
        assert_eq!(s.pooled().fp + s.pooled().fn_, 0);
        assert_eq!(s.schemas.len(), 4);
    }

    #[test]
    fn one_extra_and_one_missing_slot() {
        let r = blocksworld_schemas();
        let mut l = r.clone();
        let stack = l.iter_mut().find(|s| s.name == "stack").unwrap();
        assert!(stack.add.remove(&atom("handempty", &[])));
        stack.pre.insert(atom("clear", &["v1"]));
        let s = score(&l, &r, Scope::All, None).unwrap();
        assert_eq!(s.add.fn_, 1);
        assert_eq!(s.pre.fp, 1);
        let pooled = s.pooled();
        assert_eq!(s.precision(), pooled.tp as f64 / (pooled.tp + 1) as f64);
        assert_eq!(s.recall(), pooled.tp as f64 / (pooled.tp + 1) as f64);
    }

    #[test]
    fn complete_schemas_are_skipped_when_asked() {
        let r = blocksworld_schemas();
        let pm: PartialModel = r
            .iter()
            .filter(|s| s.name == "stack")
            .map(|s| (s.name.clone(), KnownSchema::from_schema(s, true)))
            .collect();
        let s = score(&r, &r, Scope::UnknownOnly, Some(&pm)).unwrap();
        assert_eq!(s.schemas, ["pickup", "putdown", "unstack"]);
    }

    #[test]
    fn schema_sets_must_match() {
        let r = blocksworld_schemas();
        assert!(matches!(score(&r[..3], &r, Scope::All, None), Err(ModelError::NameMismatch(_))));
    }
}
