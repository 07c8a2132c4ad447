//! Big-step rewriting of a goal by an equational parameter theorem.
//!
//! The engine scans positions top-down, leftmost-outermost, replaces the
//! first match, and restarts from the root until a full scan finds nothing.

use std::cell::Cell;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::db::Theorem;
use crate::logic::{dest_conj, dest_eq, strip_forall};
use crate::term::{alpha_equal, match_term, substitute, Term, TermKind};

/// One oriented equation `lhs = rhs` with its instantiable variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub lhs: Term,
    pub rhs: Term,
    pub pattern_vars: BTreeSet<String>,
    head: Option<String>,
}

impl Equation {
    fn new(lhs: Term, rhs: Term, pattern_vars: BTreeSet<String>) -> Self {
        let head = lhs.head().as_const().map(|(n, _)| n.to_string());
        Equation {
            lhs,
            rhs,
            pattern_vars,
            head,
        }
    }

    fn try_at(&self, subject: &Term) -> Option<Term> {
        if let Some(head) = &self.head {
            match subject.head().as_const() {
                Some((n, _)) if n == head => {}
                _ => return None,
            }
        }
        let s = match_term(&self.lhs, subject, &self.pattern_vars)?;
        substitute(&s, &self.rhs).ok()
    }
}

/// The equations of a parameter theorem, tried in order.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationSet {
    pub equations: Vec<Equation>,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriteLimits {
    pub max_steps: usize,
    pub max_size: usize,
}

impl Default for RewriteLimits {
    fn default() -> Self {
        RewriteLimits {
            max_steps: 100,
            max_size: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewriteOutcome {
    Changed(Term),
    Unchanged,
    Diverged,
}

impl RewriteOutcome {
    pub fn result(&self) -> Option<&Term> {
        match self {
            RewriteOutcome::Changed(t) => Some(t),
            _ => None,
        }
    }
}

/// 1 iff the rewrite changed the goal.
pub fn success_bit(o: &RewriteOutcome) -> u8 {
    matches!(o, RewriteOutcome::Changed(_)) as u8
}

thread_local! {
    static REWRITE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of rewrite invocations made on the current thread.
pub fn rewrite_calls() -> u64 {
    REWRITE_CALLS.with(Cell::get)
}

fn split_conjuncts<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
    match dest_conj(t) {
        Some((a, b)) => {
            split_conjuncts(a, out);
            split_conjuncts(b, out);
        }
        None => out.push(t),
    }
}

/// Interprets a statement as a list of rewrite equations.
///
/// Outer universal quantifiers become pattern variables; top-level
/// conjunctions are split (each conjunct may carry its own quantifiers).
/// Returns `None` when some conjunct is not an equation.
pub fn equations_of(name: &str, statement: &Term) -> Option<EquationSet> {
    let (outer, body) = strip_forall(statement);
    let mut conjuncts = Vec::new();
    split_conjuncts(body, &mut conjuncts);
    let mut equations = Vec::with_capacity(conjuncts.len());
    for c in conjuncts {
        let (inner, eq) = strip_forall(c);
        let (lhs, rhs) = dest_eq(eq)?;
        let lhs_free = lhs.free_var_names();
        let quantified: BTreeSet<String> = outer.iter().chain(&inner).map(|v| v.name.clone()).collect();
        if !lhs_free.is_subset(&quantified) || !rhs.free_var_names().is_subset(&lhs_free) {
            return None;
        }
        equations.push(Equation::new(lhs.clone(), rhs.clone(), lhs_free));
    }
    Some(EquationSet {
        equations,
        source: name.to_string(),
    })
}

pub fn as_equations(p: &Theorem) -> Option<EquationSet> {
    equations_of(&p.name, &p.statement)
}

fn rewrite_first(t: &Term, eqs: &[Equation]) -> Option<Term> {
    for eq in eqs {
        if let Some(r) = eq.try_at(t) {
            return Some(r);
        }
    }
    match t.kind() {
        TermKind::Var(_) | TermKind::Const { .. } => None,
        TermKind::App(f, a) => {
            if let Some(nf) = rewrite_first(f, eqs) {
                return Term::app(nf, a.clone()).ok();
            }
            let na = rewrite_first(a, eqs)?;
            Term::app(f.clone(), na).ok()
        }
        TermKind::Abs(v, b) => rewrite_first(b, eqs).map(|nb| Term::abs(v.clone(), nb)),
    }
}

/// Rewrites with a prepared equation set.
pub fn rewrite_with(goal: &Term, eqs: Option<&EquationSet>, limits: RewriteLimits) -> RewriteOutcome {
    REWRITE_CALLS.with(|c| c.set(c.get() + 1));
    let Some(eqs) = eqs else {
        return RewriteOutcome::Unchanged;
    };
    let mut current = goal.clone();
    let mut steps = 0usize;
    while let Some(next) = rewrite_first(&current, &eqs.equations) {
        steps += 1;
        if steps > limits.max_steps || next.size() > limits.max_size {
            return RewriteOutcome::Diverged;
        }
        current = next;
    }
    if steps == 0 || alpha_equal(&current, goal) {
        RewriteOutcome::Unchanged
    } else {
        RewriteOutcome::Changed(current)
    }
}

pub fn rewrite(goal: &Term, param: &Theorem, limits: RewriteLimits) -> RewriteOutcome {
    rewrite_with(goal, as_equations(param).as_ref(), limits)
}
