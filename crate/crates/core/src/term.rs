//! Simply-typed lambda terms, alpha-equivalence, capture-avoiding substitution
//! and one-way first-order matching.
//!
//! Variables are identified by name: a `Var` node refers to the innermost
//! enclosing binder of the same name, or is free.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::types::SimpleType;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("cannot apply a term of non-function type {0}")]
    NotAFunction(SimpleType),
    #[error("argument type mismatch: function expects {expected}, argument has {found}")]
    ArgumentType { expected: SimpleType, found: SimpleType },
    #[error("substitution maps variable {var} of type {expected} to a term of type {found}")]
    SubstitutionType {
        var: String,
        expected: SimpleType,
        found: SimpleType,
    },
}

/// A typed variable.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub ty: SimpleType,
}

impl Var {
    pub fn new(name: impl Into<String>, ty: SimpleType) -> Self {
        Var { name: name.into(), ty }
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.ty)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum TermKind {
    Var(Var),
    Const { name: String, ty: SimpleType },
    App(Term, Term),
    Abs(Var, Term),
}

#[derive(PartialEq, Eq, Hash)]
struct TermNode {
    kind: TermKind,
    ty: SimpleType,
    size: usize,
}

/// An immutable, well-typed term. Cloning is O(1).
#[derive(Clone, Eq, Hash)]
pub struct Term(Arc<TermNode>);

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

/// Path of child indices from the root. For `App` the children are
/// `0` (function) and `1` (argument); for `Abs` they are `0` (binder) and `1` (body).
pub type Position = Vec<u8>;

impl Term {
    pub fn var(name: impl Into<String>, ty: SimpleType) -> Term {
        Self::from_var(Var::new(name, ty))
    }

    pub fn from_var(v: Var) -> Term {
        let ty = v.ty.clone();
        Term(Arc::new(TermNode {
            kind: TermKind::Var(v),
            ty,
            size: 1,
        }))
    }

    pub fn constant(name: impl Into<String>, ty: SimpleType) -> Term {
        Term(Arc::new(TermNode {
            kind: TermKind::Const {
                name: name.into(),
                ty: ty.clone(),
            },
            ty,
            size: 1,
        }))
    }

    pub fn app(fun: Term, arg: Term) -> Result<Term, TermError> {
        let (dom, cod) = fun
            .ty()
            .dest_fun()
            .ok_or_else(|| TermError::NotAFunction(fun.ty().clone()))?;
        if dom != arg.ty() {
            return Err(TermError::ArgumentType {
                expected: dom.clone(),
                found: arg.ty().clone(),
            });
        }
        let ty = cod.clone();
        let size = 1 + fun.size() + arg.size();
        Ok(Term(Arc::new(TermNode {
            kind: TermKind::App(fun, arg),
            ty,
            size,
        })))
    }

    /// Curried application `f a1 ... an`.
    pub fn apps(fun: Term, args: impl IntoIterator<Item = Term>) -> Result<Term, TermError> {
        args.into_iter().try_fold(fun, Term::app)
    }

    pub fn abs(bound: Var, body: Term) -> Term {
        let ty = SimpleType::fun(bound.ty.clone(), body.ty().clone());
        let size = 2 + body.size();
        Term(Arc::new(TermNode {
            kind: TermKind::Abs(bound, body),
            ty,
            size,
        }))
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    pub fn ty(&self) -> &SimpleType {
        &self.0.ty
    }

    /// Number of AST nodes; a binder counts as its own node.
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn ptr_eq(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self.kind() {
            TermKind::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<(&str, &SimpleType)> {
        match self.kind() {
            TermKind::Const { name, ty } => Some((name, ty)),
            _ => None,
        }
    }

    pub fn as_app(&self) -> Option<(&Term, &Term)> {
        match self.kind() {
            TermKind::App(f, a) => Some((f, a)),
            _ => None,
        }
    }

    pub fn as_abs(&self) -> Option<(&Var, &Term)> {
        match self.kind() {
            TermKind::Abs(v, b) => Some((v, b)),
            _ => None,
        }
    }

    /// Splits `f a1 ... an` into `f` and `[a1, ..., an]`.
    pub fn strip_app(&self) -> (&Term, Vec<&Term>) {
        let mut head = self;
        let mut args = Vec::new();
        while let TermKind::App(f, a) = head.kind() {
            args.push(a);
            head = f;
        }
        args.reverse();
        (head, args)
    }

    /// Head of an application spine.
    pub fn head(&self) -> &Term {
        let mut cur = self;
        while let TermKind::App(f, _) = cur.kind() {
            cur = f;
        }
        cur
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    pub fn free_var_names(&self) -> BTreeSet<String> {
        self.free_vars().into_iter().map(|v| v.name).collect()
    }

    pub fn has_free(&self, name: &str) -> bool {
        fn go<'a>(t: &'a Term, name: &str, bound: &mut Vec<&'a str>) -> bool {
            match t.kind() {
                TermKind::Var(v) => v.name == name && !bound.contains(&name),
                TermKind::Const { .. } => false,
                TermKind::App(f, a) => go(f, name, bound) || go(a, name, bound),
                TermKind::Abs(v, b) => {
                    bound.push(&v.name);
                    let r = go(b, name, bound);
                    bound.pop();
                    r
                }
            }
        }
        go(self, name, &mut Vec::new())
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Constant names occurring in the term, sorted.
    pub fn constants(&self) -> BTreeSet<(String, SimpleType)> {
        fn go(t: &Term, out: &mut BTreeSet<(String, SimpleType)>) {
            match t.kind() {
                TermKind::Var(_) => {}
                TermKind::Const { name, ty } => {
                    out.insert((name.clone(), ty.clone()));
                }
                TermKind::App(f, a) => {
                    go(f, out);
                    go(a, out);
                }
                TermKind::Abs(_, b) => go(b, out),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Child terms in slot order (binder variable first for abstractions).
    pub fn children(&self) -> Vec<Term> {
        match self.kind() {
            TermKind::Var(_) | TermKind::Const { .. } => Vec::new(),
            TermKind::App(f, a) => vec![f.clone(), a.clone()],
            TermKind::Abs(v, b) => vec![Term::from_var(v.clone()), b.clone()],
        }
    }

    pub fn subterm_at(&self, pos: &[u8]) -> Option<Term> {
        let mut cur = self.clone();
        for &i in pos {
            cur = cur.children().into_iter().nth(i as usize)?;
        }
        Some(cur)
    }

    /// Returns a string that is identical for alpha-equivalent terms.
    pub fn alpha_key(&self) -> String {
        fn go(t: &Term, bound: &mut Vec<String>, out: &mut String) {
            match t.kind() {
                TermKind::Var(v) => match bound.iter().rposition(|b| *b == v.name) {
                    Some(level) => out.push_str(&format!("(b {level} {})", v.ty)),
                    None => out.push_str(&format!("(v {} {})", v.name, v.ty)),
                },
                TermKind::Const { name, ty } => out.push_str(&format!("(c {name} {ty})")),
                TermKind::App(f, a) => {
                    out.push_str("(app ");
                    go(f, bound, out);
                    out.push(' ');
                    go(a, bound, out);
                    out.push(')');
                }
                TermKind::Abs(v, b) => {
                    out.push_str(&format!("(abs {} ", v.ty));
                    bound.push(v.name.clone());
                    go(b, bound, out);
                    bound.pop();
                    out.push(')');
                }
            }
        }
        let mut out = String::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

fn collect_free<'a>(t: &'a Term, bound: &mut Vec<&'a str>, out: &mut Vec<Var>) {
    match t.kind() {
        TermKind::Var(v) => {
            if !bound.contains(&v.name.as_str()) && !out.contains(v) {
                out.push(v.clone());
            }
        }
        TermKind::Const { .. } => {}
        TermKind::App(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
        TermKind::Abs(v, b) => {
            bound.push(&v.name);
            collect_free(b, bound, out);
            bound.pop();
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::sexp::print_term(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::sexp::print_term(self))
    }
}

/// True iff `a` and `b` are equal up to consistent renaming of bound variables.
pub fn alpha_equal(a: &Term, b: &Term) -> bool {
    fn go<'a>(a: &'a Term, b: &'a Term, ba: &mut Vec<&'a str>, bb: &mut Vec<&'a str>) -> bool {
        if a.ptr_eq(b) && ba == bb {
            return true;
        }
        if a.size() != b.size() || a.ty() != b.ty() {
            return false;
        }
        match (a.kind(), b.kind()) {
            (TermKind::Var(x), TermKind::Var(y)) => {
                let ix = ba.iter().rposition(|n| *n == x.name);
                let iy = bb.iter().rposition(|n| *n == y.name);
                match (ix, iy) {
                    (Some(i), Some(j)) => ba.len() - i == bb.len() - j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (TermKind::Const { name: n1, ty: t1 }, TermKind::Const { name: n2, ty: t2 }) => {
                n1 == n2 && t1 == t2
            }
            (TermKind::App(f1, a1), TermKind::App(f2, a2)) => go(f1, f2, ba, bb) && go(a1, a2, ba, bb),
            (TermKind::Abs(v1, b1), TermKind::Abs(v2, b2)) => {
                if v1.ty != v2.ty {
                    return false;
                }
                ba.push(&v1.name);
                bb.push(&v2.name);
                let r = go(b1, b2, ba, bb);
                ba.pop();
                bb.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new(), &mut Vec::new())
}

/// Simultaneous substitution of terms for free variables (by name) and of
/// types for type variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Substitution {
    pub terms: BTreeMap<String, Term>,
    pub types: BTreeMap<String, SimpleType>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, name: impl Into<String>, image: Term) -> Self {
        self.terms.insert(name.into(), image);
        self
    }

    pub fn with_type(mut self, name: impl Into<String>, image: SimpleType) -> Self {
        self.types.insert(name.into(), image);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.types.is_empty()
    }
}

/// Instantiates type variables throughout a term.
pub fn instantiate_types(t: &Term, map: &BTreeMap<String, SimpleType>) -> Term {
    if map.is_empty() {
        return t.clone();
    }
    match t.kind() {
        TermKind::Var(v) => {
            let ty = v.ty.instantiate(map);
            if ty == v.ty {
                t.clone()
            } else {
                Term::var(v.name.clone(), ty)
            }
        }
        TermKind::Const { name, ty } => {
            let new_ty = ty.instantiate(map);
            if &new_ty == ty {
                t.clone()
            } else {
                Term::constant(name.clone(), new_ty)
            }
        }
        TermKind::App(f, a) => {
            let (nf, na) = (instantiate_types(f, map), instantiate_types(a, map));
            if nf.ptr_eq(f) && na.ptr_eq(a) {
                t.clone()
            } else {
                Term::app(nf, na).expect("type instantiation preserves typing")
            }
        }
        TermKind::Abs(v, b) => {
            let nb = instantiate_types(b, map);
            let vt = v.ty.instantiate(map);
            if nb.ptr_eq(b) && vt == v.ty {
                t.clone()
            } else {
                Term::abs(Var::new(v.name.clone(), vt), nb)
            }
        }
    }
}

/// Picks `base'`, `base''`, ... until the name is not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = format!("{base}'");
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// Capture-avoiding simultaneous substitution.
pub fn substitute(s: &Substitution, t: &Term) -> Result<Term, TermError> {
    let t = instantiate_types(t, &s.types);
    if s.terms.is_empty() {
        return Ok(t);
    }
    let map: BTreeMap<&str, &Term> = s.terms.iter().map(|(k, v)| (k.as_str(), v)).collect();
    subst_terms(&t, &map)
}

fn subst_terms(t: &Term, map: &BTreeMap<&str, &Term>) -> Result<Term, TermError> {
    match t.kind() {
        TermKind::Var(v) => match map.get(v.name.as_str()) {
            Some(image) => {
                if image.ty() != &v.ty {
                    return Err(TermError::SubstitutionType {
                        var: v.name.clone(),
                        expected: v.ty.clone(),
                        found: image.ty().clone(),
                    });
                }
                Ok((*image).clone())
            }
            None => Ok(t.clone()),
        },
        TermKind::Const { .. } => Ok(t.clone()),
        TermKind::App(f, a) => {
            let nf = subst_terms(f, map)?;
            let na = subst_terms(a, map)?;
            if nf.ptr_eq(f) && na.ptr_eq(a) {
                Ok(t.clone())
            } else {
                Term::app(nf, na)
            }
        }
        TermKind::Abs(v, body) => {
            let body_free = body.free_var_names();
            let relevant: BTreeMap<&str, &Term> = map
                .iter()
                .filter(|(k, _)| **k != v.name && body_free.contains(**k))
                .map(|(k, img)| (*k, *img))
                .collect();
            if relevant.is_empty() {
                return Ok(t.clone());
            }
            let captures = relevant.values().any(|img| img.has_free(&v.name));
            if !captures {
                let nb = subst_terms(body, &relevant)?;
                return Ok(Term::abs(v.clone(), nb));
            }
            let mut avoid = body_free;
            for img in relevant.values() {
                avoid.extend(img.free_var_names());
            }
            let fresh = Var::new(fresh_name(&v.name, &avoid), v.ty.clone());
            let renamed = Term::from_var(fresh.clone());
            let mut inner = relevant;
            inner.insert(v.name.as_str(), &renamed);
            let nb = subst_terms(body, &inner)?;
            Ok(Term::abs(fresh, nb))
        }
    }
}

/// One-way first-order matching of `pattern` against `subject`.
///
/// Only free variables of `pattern` whose names are in `pattern_vars` may be
/// instantiated, together with the pattern's type variables. Subject
/// variables bound inside `subject` never escape into the result.
pub fn match_term(pattern: &Term, subject: &Term, pattern_vars: &BTreeSet<String>) -> Option<Substitution> {
    let mut m = Matcher {
        pattern_vars,
        sub: Substitution::new(),
        pbound: Vec::new(),
        sbound: Vec::new(),
    };
    if m.go(pattern, subject) {
        Some(m.sub)
    } else {
        None
    }
}

struct Matcher<'a> {
    pattern_vars: &'a BTreeSet<String>,
    sub: Substitution,
    pbound: Vec<String>,
    sbound: Vec<String>,
}

impl Matcher<'_> {
    fn bound_depth(stack: &[String], name: &str) -> Option<usize> {
        stack.iter().rposition(|n| n == name).map(|i| stack.len() - i)
    }

    fn go(&mut self, p: &Term, s: &Term) -> bool {
        match p.kind() {
            TermKind::Var(pv) => {
                if let Some(pd) = Self::bound_depth(&self.pbound, &pv.name) {
                    return match s.kind() {
                        TermKind::Var(sv) => {
                            Self::bound_depth(&self.sbound, &sv.name) == Some(pd)
                                && pv.ty.match_into(&sv.ty, &mut self.sub.types)
                        }
                        _ => false,
                    };
                }
                if self.pattern_vars.contains(&pv.name) {
                    if self.sbound.iter().any(|b| s.has_free(b)) {
                        return false;
                    }
                    if !pv.ty.match_into(s.ty(), &mut self.sub.types) {
                        return false;
                    }
                    return match self.sub.terms.get(&pv.name) {
                        Some(prev) => alpha_equal(prev, s),
                        None => {
                            self.sub.terms.insert(pv.name.clone(), s.clone());
                            true
                        }
                    };
                }
                match s.kind() {
                    TermKind::Var(sv) => {
                        sv.name == pv.name
                            && Self::bound_depth(&self.sbound, &sv.name).is_none()
                            && pv.ty.match_into(&sv.ty, &mut self.sub.types)
                    }
                    _ => false,
                }
            }
            TermKind::Const { name, ty } => match s.kind() {
                TermKind::Const { name: sn, ty: sty } => name == sn && ty.match_into(sty, &mut self.sub.types),
                _ => false,
            },
            TermKind::App(pf, pa) => match s.kind() {
                TermKind::App(sf, sa) => self.go(pf, sf) && self.go(pa, sa),
                _ => false,
            },
            TermKind::Abs(pv, pb) => match s.kind() {
                TermKind::Abs(sv, sb) => {
                    if !pv.ty.match_into(&sv.ty, &mut self.sub.types) {
                        return false;
                    }
                    self.pbound.push(pv.name.clone());
                    self.sbound.push(sv.name.clone());
                    let r = self.go(pb, sb);
                    self.pbound.pop();
                    self.sbound.pop();
                    r
                }
                _ => false,
            },
        }
    }
}

/// All positions of `t` in top-down, leftmost-outermost order.
pub fn subterm_positions(t: &Term) -> Vec<Position> {
    fn go(t: &Term, path: &mut Position, out: &mut Vec<Position>) {
        out.push(path.clone());
        match t.kind() {
            TermKind::Var(_) | TermKind::Const { .. } => {}
            TermKind::App(f, a) => {
                path.push(0);
                go(f, path, out);
                path.pop();
                path.push(1);
                go(a, path, out);
                path.pop();
            }
            TermKind::Abs(_, b) => {
                path.push(0);
                out.push(path.clone());
                path.pop();
                path.push(1);
                go(b, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::with_capacity(t.size());
    go(t, &mut Vec::new(), &mut out);
    out
}
