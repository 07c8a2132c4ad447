//! Logical connectives and their constructors/destructors.

use crate::term::{Term, TermError, TermKind, Var};
use crate::types::SimpleType;

pub const EQ: &str = "=";
pub const FORALL: &str = "!";
pub const CONJ: &str = "/\\";

fn alpha() -> SimpleType {
    SimpleType::var("'a")
}

pub fn eq_const(ty: &SimpleType) -> Term {
    Term::constant(EQ, SimpleType::curried(&[ty.clone(), ty.clone()], SimpleType::bool()))
}

pub fn mk_eq(lhs: Term, rhs: Term) -> Result<Term, TermError> {
    let eq = eq_const(lhs.ty());
    Term::apps(eq, [lhs, rhs])
}

/// `(lhs, rhs)` when `t` is an equation.
pub fn dest_eq(t: &Term) -> Option<(&Term, &Term)> {
    let (head, args) = t.strip_app();
    match (head.as_const(), args.as_slice()) {
        (Some((name, _)), [l, r]) if name == EQ => Some((*l, *r)),
        _ => None,
    }
}

pub fn forall_const(ty: &SimpleType) -> Term {
    Term::constant(
        FORALL,
        SimpleType::fun(SimpleType::fun(ty.clone(), SimpleType::bool()), SimpleType::bool()),
    )
}

pub fn mk_forall(v: Var, body: Term) -> Result<Term, TermError> {
    let q = forall_const(&v.ty);
    Term::app(q, Term::abs(v, body))
}

/// Universally closes `body` over `vars`, outermost first.
pub fn mk_foralls(vars: &[Var], body: Term) -> Result<Term, TermError> {
    vars.iter().rev().try_fold(body, |acc, v| mk_forall(v.clone(), acc))
}

pub fn dest_forall(t: &Term) -> Option<(&Var, &Term)> {
    let (f, a) = t.as_app()?;
    match (f.as_const(), a.kind()) {
        (Some((name, _)), TermKind::Abs(v, body)) if name == FORALL => Some((v, body)),
        _ => None,
    }
}

/// Strips all outer universal quantifiers.
pub fn strip_forall(t: &Term) -> (Vec<Var>, &Term) {
    let mut vars = Vec::new();
    let mut cur = t;
    while let Some((v, body)) = dest_forall(cur) {
        vars.push(v.clone());
        cur = body;
    }
    (vars, cur)
}

pub fn conj_const() -> Term {
    let b = SimpleType::bool();
    Term::constant(CONJ, SimpleType::curried(&[b.clone(), b.clone()], b))
}

pub fn mk_conj(a: Term, b: Term) -> Result<Term, TermError> {
    Term::apps(conj_const(), [a, b])
}

pub fn dest_conj(t: &Term) -> Option<(&Term, &Term)> {
    let (head, args) = t.strip_app();
    match (head.as_const(), args.as_slice()) {
        (Some((name, _)), [l, r]) if name == CONJ => Some((*l, *r)),
        _ => None,
    }
}

/// Type of the polymorphic equality constant, for signatures.
pub fn eq_type() -> SimpleType {
    SimpleType::curried(&[alpha(), alpha()], SimpleType::bool())
}

pub fn forall_type() -> SimpleType {
    SimpleType::fun(SimpleType::fun(alpha(), SimpleType::bool()), SimpleType::bool())
}
