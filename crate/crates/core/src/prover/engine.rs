//! The simulated tactic engine: a small, deterministic equational calculus.
//!
//! Goals are term equations (optionally universally closed) or conjunctions
//! of them. Premises are equations whose free variables act as pattern
//! variables. Rewriting scans the goal in pre-order and takes the first
//! premise in the given (ranked) order whose pattern matches somewhere, so
//! premise ordering genuinely decides what happens to a goal.

use crate::sexpr::SExpr;
use std::collections::HashMap;
use thiserror::Error;

/// Fixed tactic identifiers understood by the engine. Identifiers above
/// [`LAST_REAL_TACTIC`] exist in the classifier vocabulary but always fail.
pub const TACTIC_REFL: usize = 0;
pub const TACTIC_REWRITE: usize = 1;
pub const TACTIC_REWRITE_ALL: usize = 2;
pub const TACTIC_SPLIT: usize = 3;
pub const TACTIC_REWRITE_RTL: usize = 4;
pub const LAST_REAL_TACTIC: usize = TACTIC_REWRITE_RTL;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TacticOutcome {
    Failed,
    Closed,
    /// Nonempty list of new goals.
    Subgoals(Vec<SExpr>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown tactic id {id} (engine knows {known} tactics)")]
    UnknownTactic { id: usize, known: usize },
}

/// Strip leading `∀` applications: `(a (c τ !) (l binder body))` → body.
pub fn strip_foralls(term: &SExpr) -> &SExpr {
    let mut at = term;
    loop {
        let SExpr::Node(children) = at else { return at };
        if children.len() != 3 {
            return at;
        }
        let is_forall = matches!(children[0], SExpr::Atom(ref h) if h == "a")
            && matches!(children[1].app(), Some(("c", args)) if matches!(args.last(), Some(SExpr::Atom(n)) if n == "!"));
        if !is_forall {
            return at;
        }
        match children[2].app() {
            Some(("l", args)) if args.len() == 2 => at = &args[1],
            _ => return at,
        }
    }
}

/// Split `(a (a (c τ name) lhs) rhs)` for a binary constant `name`.
fn as_binary_const<'a>(term: &'a SExpr, name: &str) -> Option<(&'a SExpr, &'a SExpr)> {
    let ("a", outer) = term.app()? else { return None };
    if outer.len() != 2 {
        return None;
    }
    let ("a", inner) = outer[0].app()? else { return None };
    if inner.len() != 2 {
        return None;
    }
    let ("c", cargs) = inner[0].app()? else { return None };
    match cargs.last() {
        Some(SExpr::Atom(n)) if n == name => Some((&inner[1], &outer[1])),
        _ => None,
    }
}

pub fn as_equation(term: &SExpr) -> Option<(&SExpr, &SExpr)> {
    as_binary_const(term, "=")
}

pub fn as_conjunction(term: &SExpr) -> Option<(&SExpr, &SExpr)> {
    as_binary_const(term, "/\\")
}

/// A goal counts as reflexive when, after stripping quantifiers, it is an
/// equation with syntactically equal sides.
pub fn is_reflexive(goal: &SExpr) -> bool {
    match as_equation(strip_foralls(goal)) {
        Some((l, r)) => l == r,
        None => false,
    }
}

/// Variable nodes `(v τ name)` in patterns match any term, bound by name.
fn pattern_var(term: &SExpr) -> Option<&str> {
    match term.app() {
        Some(("v", args)) if args.len() == 2 => match &args[1] {
            SExpr::Atom(name) => Some(name),
            _ => None,
        },
        _ => None,
    }
}

fn match_pattern<'a>(
    pattern: &SExpr,
    term: &'a SExpr,
    bindings: &mut HashMap<String, &'a SExpr>,
) -> bool {
    if let Some(name) = pattern_var(pattern) {
        match bindings.get(name) {
            Some(&bound) => return bound == term,
            None => {
                bindings.insert(name.to_string(), term);
                return true;
            }
        }
    }
    match (pattern, term) {
        (SExpr::Atom(a), SExpr::Atom(b)) => a == b,
        (SExpr::Node(ps), SExpr::Node(ts)) => {
            ps.len() == ts.len()
                && ps
                    .iter()
                    .zip(ts)
                    .all(|(p, t)| match_pattern(p, t, bindings))
        }
        _ => false,
    }
}

fn instantiate(template: &SExpr, bindings: &HashMap<String, &SExpr>) -> SExpr {
    if let Some(name) = pattern_var(template) {
        if let Some(&bound) = bindings.get(name) {
            return bound.clone();
        }
    }
    match template {
        SExpr::Atom(_) => template.clone(),
        SExpr::Node(children) => SExpr::Node(
            children
                .iter()
                .map(|c| instantiate(c, bindings))
                .collect(),
        ),
    }
}

/// Rewrite the first pre-order occurrence of `lhs` in `term` (head atoms are
/// not terms and are skipped). Returns None when nothing matches.
fn rewrite_first(term: &SExpr, lhs: &SExpr, rhs: &SExpr) -> Option<SExpr> {
    let mut bindings = HashMap::new();
    if match_pattern(lhs, term, &mut bindings) {
        return Some(instantiate(rhs, &bindings));
    }
    if let SExpr::Node(children) = term {
        for (k, child) in children.iter().enumerate().skip(1) {
            if let Some(new_child) = rewrite_first(child, lhs, rhs) {
                let mut out = children.clone();
                out[k] = new_child;
                return Some(SExpr::Node(out));
            }
        }
    }
    None
}

/// Rewrite every occurrence of `lhs` in one pass (outermost occurrences win;
/// replacements are not re-scanned). Returns None when nothing matched.
fn rewrite_all(term: &SExpr, lhs: &SExpr, rhs: &SExpr) -> Option<SExpr> {
    let mut bindings = HashMap::new();
    if match_pattern(lhs, term, &mut bindings) {
        return Some(instantiate(rhs, &bindings));
    }
    if let SExpr::Node(children) = term {
        let mut out: Option<Vec<SExpr>> = None;
        for (k, child) in children.iter().enumerate().skip(1) {
            if let Some(new_child) = rewrite_all(child, lhs, rhs) {
                out.get_or_insert_with(|| children.clone())[k] = new_child;
            }
        }
        return out.map(SExpr::Node);
    }
    None
}

/// Premise equation oriented for rewriting; strips any universal closure.
fn premise_equation(statement: &SExpr, reversed: bool) -> Option<(&SExpr, &SExpr)> {
    let (l, r) = as_equation(strip_foralls(statement))?;
    Some(if reversed { (r, l) } else { (l, r) })
}

/// The tactic engine; `n_tactics` is the size of the classifier vocabulary.
#[derive(Debug, Clone, Copy)]
pub struct Engine {
    pub n_tactics: usize,
}

impl Engine {
    pub fn new(n_tactics: usize) -> Self {
        Engine { n_tactics }
    }

    /// Apply one tactic with an ordered premise list. Deterministic:
    /// identical inputs give identical outcomes.
    pub fn apply_tactic(
        &self,
        goal: &SExpr,
        tactic_id: usize,
        premises: &[&SExpr],
    ) -> Result<TacticOutcome, EngineError> {
        if tactic_id >= self.n_tactics {
            return Err(EngineError::UnknownTactic {
                id: tactic_id,
                known: self.n_tactics,
            });
        }
        Ok(match tactic_id {
            TACTIC_REFL => {
                if is_reflexive(goal) {
                    TacticOutcome::Closed
                } else {
                    TacticOutcome::Failed
                }
            }
            TACTIC_REWRITE => self.rewrite_with(goal, premises, false, false),
            TACTIC_REWRITE_ALL => self.rewrite_with(goal, premises, false, true),
            TACTIC_REWRITE_RTL => self.rewrite_with(goal, premises, true, false),
            TACTIC_SPLIT => match as_conjunction(strip_foralls(goal)) {
                Some((a, b)) => TacticOutcome::Subgoals(vec![a.clone(), b.clone()]),
                None => TacticOutcome::Failed,
            },
            _ => TacticOutcome::Failed,
        })
    }

    fn rewrite_with(
        &self,
        goal: &SExpr,
        premises: &[&SExpr],
        reversed: bool,
        all_occurrences: bool,
    ) -> TacticOutcome {
        for premise in premises {
            let Some((lhs, rhs)) = premise_equation(premise, reversed) else {
                continue;
            };
            // A bare-variable pattern matches everything including the goal
            // itself; such premises are degenerate and skipped.
            if pattern_var(lhs).is_some() {
                continue;
            }
            let rewritten = if all_occurrences {
                rewrite_all(goal, lhs, rhs)
            } else {
                rewrite_first(goal, lhs, rhs)
            };
            if let Some(new_goal) = rewritten {
                if new_goal == *goal {
                    // No-op rewrite (e.g. by a reflexive equation); try the
                    // next premise rather than looping in place.
                    continue;
                }
                return if is_reflexive(&new_goal) {
                    TacticOutcome::Closed
                } else {
                    TacticOutcome::Subgoals(vec![new_goal])
                };
            }
        }
        TacticOutcome::Failed
    }
}
