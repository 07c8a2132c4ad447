//! Deterministic synthetic theorem corpus.
//!
//! The database starts with a fixed block of equational laws over a small
//! signature (arithmetic, pairs, lists, booleans and a few uninterpreted
//! functions), followed by random closed statements over the same signature,
//! ordered by increasing generation depth.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db::{DbError, Split, TheoremDatabase};
use crate::logic::{conj_const, mk_conj, mk_eq, mk_foralls};
use crate::rewrite::equations_of;
use crate::term::{Term, Var};
use crate::types::SimpleType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    /// Depth of the shallowest random statements.
    pub min_depth: usize,
    /// Depth of the deepest random statements.
    pub max_depth: usize,
    /// Probability that a random statement is an equation (otherwise a
    /// boolean combination of atoms).
    pub equation_prob: f64,
    /// Probability of a leaf when growing a subterm below the depth limit.
    pub leaf_prob: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            train_fraction: 0.6,
            valid_fraction: 0.2,
            min_depth: 2,
            max_depth: 4,
            equation_prob: 0.7,
            leaf_prob: 0.3,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus size {size} is too small (minimum {min})")]
    TooSmall { size: usize, min: usize },
    #[error("invalid split fractions {0} / {1}")]
    BadFractions(f64, f64),
    #[error(transparent)]
    Db(#[from] DbError),
}

pub const MIN_CORPUS_SIZE: usize = 20;

fn num() -> SimpleType {
    SimpleType::base("num")
}

fn bool_ty() -> SimpleType {
    SimpleType::bool()
}

fn list(a: SimpleType) -> SimpleType {
    SimpleType::con("list", vec![a])
}

fn prod(a: SimpleType, b: SimpleType) -> SimpleType {
    SimpleType::con("prod", vec![a, b])
}

fn c(name: &str, ty: SimpleType) -> Term {
    Term::constant(name, ty)
}

fn ap(f: Term, args: Vec<Term>) -> Term {
    Term::apps(f, args).expect("corpus terms are well-typed")
}

/// Builders for the constants of the corpus signature.
mod sig {
    use super::*;

    pub fn numeral(n: u8) -> Term {
        c(&n.to_string(), num())
    }
    pub fn suc(a: Term) -> Term {
        ap(c("SUC", SimpleType::fun(num(), num())), vec![a])
    }
    pub fn binop(op: &str, a: Term, b: Term) -> Term {
        ap(c(op, SimpleType::curried(&[num(), num()], num())), vec![a, b])
    }
    pub fn unop(op: &str, a: Term) -> Term {
        ap(c(op, SimpleType::fun(num(), num())), vec![a])
    }
    pub fn le(a: Term, b: Term) -> Term {
        ap(c("<=", SimpleType::curried(&[num(), num()], bool_ty())), vec![a, b])
    }
    pub fn pair(a: Term, b: Term) -> Term {
        let (ta, tb) = (a.ty().clone(), b.ty().clone());
        ap(c("pair", SimpleType::curried(&[ta.clone(), tb.clone()], prod(ta, tb))), vec![a, b])
    }
    pub fn fst(p: Term) -> Term {
        let (a, _) = prod_args(p.ty());
        ap(c("fst", SimpleType::fun(p.ty().clone(), a)), vec![p])
    }
    pub fn snd(p: Term) -> Term {
        let (_, b) = prod_args(p.ty());
        ap(c("snd", SimpleType::fun(p.ty().clone(), b)), vec![p])
    }
    fn prod_args(t: &SimpleType) -> (SimpleType, SimpleType) {
        match t.kind() {
            crate::types::TypeKind::Con(n, args) if n == "prod" && args.len() == 2 => (args[0].clone(), args[1].clone()),
            _ => panic!("not a product type: {t}"),
        }
    }
    fn elem(t: &SimpleType) -> SimpleType {
        match t.kind() {
            crate::types::TypeKind::Con(n, args) if n == "list" && args.len() == 1 => args[0].clone(),
            _ => panic!("not a list type: {t}"),
        }
    }
    pub fn nil(a: SimpleType) -> Term {
        c("nil", list(a))
    }
    pub fn cons(h: Term, t: Term) -> Term {
        let lt = t.ty().clone();
        ap(c("cons", SimpleType::curried(&[h.ty().clone(), lt.clone()], lt)), vec![h, t])
    }
    pub fn append(a: Term, b: Term) -> Term {
        let lt = a.ty().clone();
        ap(c("append", SimpleType::curried(&[lt.clone(), lt.clone()], lt)), vec![a, b])
    }
    pub fn len(l: Term) -> Term {
        let _ = elem(l.ty());
        ap(c("len", SimpleType::fun(l.ty().clone(), num())), vec![l])
    }
    pub fn truth(b: bool) -> Term {
        c(if b { "T" } else { "F" }, bool_ty())
    }
    pub fn not(p: Term) -> Term {
        ap(c("~", SimpleType::fun(bool_ty(), bool_ty())), vec![p])
    }
    pub fn bool_op(op: &str, a: Term, b: Term) -> Term {
        if op == "/\\" {
            return ap(conj_const(), vec![a, b]);
        }
        ap(c(op, SimpleType::curried(&[bool_ty(), bool_ty()], bool_ty())), vec![a, b])
    }
    pub fn eq(a: Term, b: Term) -> Term {
        mk_eq(a, b).expect("equation sides share a type")
    }
}

use sig::*;

fn var(name: &str, ty: SimpleType) -> (Var, Term) {
    let v = Var::new(name, ty);
    let t = Term::from_var(v.clone());
    (v, t)
}

fn closed(vars: &[Var], body: Term) -> Term {
    mk_foralls(vars, body).expect("quantified body is boolean")
}

/// The fixed axiom block: `(name, statement)` pairs.
pub fn axioms() -> Vec<(String, Term)> {
    let (xv, x) = var("x", num());
    let (yv, y) = var("y", num());
    let (zv, z) = var("z", num());
    let (pv, p) = var("p", bool_ty());
    let a = SimpleType::var("'a");
    let b = SimpleType::var("'b");
    let (pa, pa_t) = var("x", a.clone());
    let (pb, pb_t) = var("y", b.clone());
    let (qv, q) = var("q", prod(a.clone(), b.clone()));
    let (hv, h) = var("h", a.clone());
    let (tv, t) = var("t", list(a.clone()));
    let (lv, l) = var("l", list(a.clone()));
    let (mv, m) = var("m", list(a.clone()));
    let (nv, n) = var("n", list(a.clone()));
    let zero = numeral(0);
    let one = numeral(1);

    let add = |a: &Term, b: &Term| binop("+", a.clone(), b.clone());
    let mul = |a: &Term, b: &Term| binop("*", a.clone(), b.clone());
    let pow = |a: &Term, b: &Term| binop("^", a.clone(), b.clone());

    let and_clauses = mk_conj(
        closed(&[pv.clone()], eq(bool_op("/\\", truth(true), p.clone()), p.clone())),
        mk_conj(
            closed(&[pv.clone()], eq(bool_op("/\\", p.clone(), truth(true)), p.clone())),
            closed(&[pv.clone()], eq(bool_op("/\\", truth(false), p.clone()), truth(false))),
        )
        .unwrap(),
    )
    .unwrap();

    let raw: Vec<(&str, Term)> = vec![
        ("ADD_0", closed(&[xv.clone()], eq(add(&x, &zero), x.clone()))),
        ("ZERO_ADD", closed(&[xv.clone()], eq(add(&zero, &x), x.clone()))),
        ("ADD_SYM", closed(&[xv.clone(), yv.clone()], eq(add(&x, &y), add(&y, &x)))),
        (
            "ADD_ASSOC",
            closed(&[xv.clone(), yv.clone(), zv.clone()], eq(add(&add(&x, &y), &z), add(&x, &add(&y, &z)))),
        ),
        ("MUL_1", closed(&[xv.clone()], eq(mul(&x, &one), x.clone()))),
        ("ONE_MUL", closed(&[xv.clone()], eq(mul(&one, &x), x.clone()))),
        ("MUL_0", closed(&[xv.clone()], eq(mul(&x, &zero), zero.clone()))),
        ("MUL_SYM", closed(&[xv.clone(), yv.clone()], eq(mul(&x, &y), mul(&y, &x)))),
        (
            "LEFT_DISTRIB",
            closed(&[xv.clone(), yv.clone(), zv.clone()], eq(mul(&x, &add(&y, &z)), add(&mul(&x, &y), &mul(&x, &z)))),
        ),
        ("POW_2", closed(&[xv.clone()], eq(pow(&x, &numeral(2)), mul(&x, &x)))),
        ("POW_1", closed(&[xv.clone()], eq(pow(&x, &one), x.clone()))),
        ("POW_0", closed(&[xv.clone()], eq(pow(&x, &zero), one.clone()))),
        ("ADD_SUC", closed(&[xv.clone(), yv.clone()], eq(add(&x, &suc(y.clone())), suc(add(&x, &y))))),
        ("SUC_0", eq(suc(zero.clone()), one.clone())),
        ("FST", closed(&[pa.clone(), pb.clone()], eq(fst(pair(pa_t.clone(), pb_t.clone())), pa_t.clone()))),
        ("SND", closed(&[pa.clone(), pb.clone()], eq(snd(pair(pa_t.clone(), pb_t.clone())), pb_t.clone()))),
        ("PAIR_ETA", closed(&[qv], eq(pair(fst(q.clone()), snd(q.clone())), q.clone()))),
        ("APPEND_NIL", closed(&[lv.clone()], eq(append(nil(a.clone()), l.clone()), l.clone()))),
        (
            "APPEND_CONS",
            closed(
                &[hv.clone(), tv.clone(), lv.clone()],
                eq(append(cons(h.clone(), t.clone()), l.clone()), cons(h.clone(), append(t.clone(), l.clone()))),
            ),
        ),
        (
            "APPEND_ASSOC",
            closed(
                &[lv.clone(), mv, nv],
                eq(append(append(l.clone(), m.clone()), n.clone()), append(l.clone(), append(m, n))),
            ),
        ),
        ("LEN_NIL", eq(len(nil(a.clone())), zero.clone())),
        ("LEN_CONS", closed(&[hv, tv], eq(len(cons(h, t.clone())), suc(len(t))))),
        ("NOT_T", eq(not(truth(true)), truth(false))),
        ("NOT_F", eq(not(truth(false)), truth(true))),
        ("NOT_NOT", closed(&[pv.clone()], eq(not(not(p.clone())), p.clone()))),
        ("AND_CLAUSES", and_clauses),
        ("OR_F", closed(&[pv.clone()], eq(bool_op("\\/", p.clone(), truth(false)), p.clone()))),
        ("IMP_T", closed(&[pv.clone()], eq(bool_op("==>", truth(true), p.clone()), p.clone()))),
        ("EQ_REFL", closed(&[pa.clone()], eq(eq(pa_t.clone(), pa_t.clone()), truth(true)))),
        ("F_INVOL", closed(&[xv.clone()], eq(unop("f", unop("f", x.clone())), x.clone()))),
        ("G_ZERO", eq(unop("g", zero.clone()), zero.clone())),
        ("G_SUC", closed(&[xv.clone()], eq(unop("g", suc(x.clone())), binop("h", x.clone(), unop("g", x.clone()))))),
        ("H_0", closed(&[xv.clone()], eq(binop("h", x.clone(), zero.clone()), unop("f", x.clone())))),
        ("NOT_SUC_0", closed(&[xv.clone()], not(eq(suc(x.clone()), zero.clone())))),
        ("LE_0", closed(&[xv], le(zero, x))),
        ("ADD_LE", closed(&[yv, zv], le(y.clone(), add(&y, &z)))),
    ];
    raw.into_iter().map(|(n, t)| (n.to_string(), t)).collect()
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    leaf_prob: f64,
    num_vars: Vec<Var>,
    list_vars: Vec<Var>,
    used: Vec<Var>,
}

impl Gen<'_> {
    fn use_var(&mut self, v: &Var) -> Term {
        if !self.used.contains(v) {
            self.used.push(v.clone());
        }
        Term::from_var(v.clone())
    }

    fn leaf(&mut self) -> bool {
        self.rng.random_bool(self.leaf_prob)
    }

    fn num_term(&mut self, depth: usize) -> Term {
        if depth == 0 || self.leaf() {
            return if self.rng.random_bool(0.5) && !self.num_vars.is_empty() {
                let v = self.num_vars.choose(self.rng).unwrap().clone();
                self.use_var(&v)
            } else {
                numeral(*[0u8, 1, 2, 3].choose(self.rng).unwrap())
            };
        }
        let d = depth - 1;
        match self.rng.random_range(0..11) {
            0 => suc(self.num_term(d)),
            1 | 2 => {
                let (a, b) = (self.num_term(d), self.num_term(d));
                binop("+", a, b)
            }
            3 => {
                let (a, b) = (self.num_term(d), self.num_term(d));
                binop("*", a, b)
            }
            4 => {
                let a = self.num_term(d);
                binop("^", a, numeral(*[0u8, 1, 2].choose(self.rng).unwrap()))
            }
            5 => unop("f", self.num_term(d)),
            6 => unop("g", self.num_term(d)),
            7 => {
                let (a, b) = (self.num_term(d), self.num_term(d));
                binop("h", a, b)
            }
            8 => {
                let (a, b) = (self.num_term(d), self.num_term(d));
                if self.rng.random_bool(0.5) {
                    fst(pair(a, b))
                } else {
                    snd(pair(a, b))
                }
            }
            _ => len(self.list_term(d)),
        }
    }

    fn list_term(&mut self, depth: usize) -> Term {
        if depth == 0 || self.leaf() {
            return if self.rng.random_bool(0.6) && !self.list_vars.is_empty() {
                let v = self.list_vars.choose(self.rng).unwrap().clone();
                self.use_var(&v)
            } else {
                nil(num())
            };
        }
        let d = depth - 1;
        if self.rng.random_bool(0.5) {
            let (h, t) = (self.num_term(d), self.list_term(d));
            cons(h, t)
        } else {
            let (a, b) = (self.list_term(d), self.list_term(d));
            append(a, b)
        }
    }

    fn atom(&mut self, depth: usize) -> Term {
        match self.rng.random_range(0..6) {
            0 => {
                let (a, b) = (self.list_term(depth), self.list_term(depth));
                eq(a, b)
            }
            1 => {
                let (a, b) = (self.num_term(depth), self.num_term(depth));
                le(a, b)
            }
            2 => truth(self.rng.random_bool(0.5)),
            _ => {
                let (a, b) = (self.num_term(depth), self.num_term(depth));
                eq(a, b)
            }
        }
    }

    fn formula(&mut self, depth: usize, equation_prob: f64) -> Term {
        if self.rng.random_bool(equation_prob) {
            return self.atom(depth);
        }
        let d = depth.saturating_sub(1).max(1);
        match self.rng.random_range(0..4) {
            0 => not(self.atom(d)),
            1 => {
                let (a, b) = (self.atom(d), self.atom(d));
                bool_op("/\\", a, b)
            }
            2 => {
                let (a, b) = (self.atom(d), self.atom(d));
                bool_op("\\/", a, b)
            }
            _ => {
                let (a, b) = (self.atom(d), self.atom(d));
                bool_op("==>", a, b)
            }
        }
    }
}

/// Ground rules such as `0 = 3` would rewrite every goal mentioning the
/// constant; the generator leaves them out.
fn rewrites_a_constant(stmt: &Term) -> bool {
    equations_of("", stmt).is_some_and(|eqs| eqs.equations.iter().any(|e| e.lhs.as_const().is_some()))
}

/// Generates the corpus. Pure in `(seed, size, config)`.
pub fn generate_corpus(seed: u64, size: usize, config: &CorpusConfig) -> Result<TheoremDatabase, CorpusError> {
    let axioms = axioms();
    let min = MIN_CORPUS_SIZE.max(axioms.len() + 1);
    if size < min {
        return Err(CorpusError::TooSmall { size, min });
    }
    let (tf, vf) = (config.train_fraction, config.valid_fraction);
    if !(0.0..=1.0).contains(&tf) || !(0.0..=1.0).contains(&vf) || tf + vf > 1.0 {
        return Err(CorpusError::BadFractions(tf, vf));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_random = size - axioms.len();
    let mut statements: Vec<(String, Term)> = axioms;
    let span = config.max_depth.saturating_sub(config.min_depth) + 1;
    let mut seen = std::collections::HashSet::new();
    let mut i = 0usize;
    while statements.len() < size {
        let depth = config.min_depth + (i * span) / n_random.max(1);
        let depth = depth.min(config.max_depth);
        let num_vars: Vec<Var> = ["x", "y", "z"]
            .iter()
            .take(rng.random_range(0..=3))
            .map(|n| Var::new(*n, num()))
            .collect();
        let list_vars: Vec<Var> = ["l", "m"]
            .iter()
            .take(rng.random_range(0..=2))
            .map(|n| Var::new(*n, list(num())))
            .collect();
        let mut g = Gen {
            rng: &mut rng,
            leaf_prob: config.leaf_prob,
            num_vars,
            list_vars,
            used: Vec::new(),
        };
        let body = g.formula(depth, config.equation_prob);
        let used = g.used.clone();
        let stmt = closed(&used, body);
        let key = stmt.alpha_key();
        if !rewrites_a_constant(&stmt) && seen.insert(key) {
            statements.push((format!("thm_{i:05}"), stmt));
        }
        i += 1;
    }

    let n_train = ((size as f64) * tf).round() as usize;
    let n_valid = ((size as f64) * vf).round() as usize;
    let entries = statements
        .into_iter()
        .enumerate()
        .map(|(idx, (name, stmt))| {
            let split = if idx < n_train {
                Split::Train
            } else if idx < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            };
            (name, stmt, split)
        })
        .collect();
    Ok(TheoremDatabase::new(entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::equations_of;

    #[test]
    fn axioms_are_closed_booleans_with_expected_shapes() {
        let ax = axioms();
        for (name, t) in &ax {
            assert!(t.is_closed(), "{name}");
            assert!(t.ty().is_bool(), "{name}");
        }
        let by_name: std::collections::BTreeMap<_, _> = ax.iter().cloned().collect();
        assert!(equations_of("FST", &by_name["FST"]).is_some());
        assert_eq!(equations_of("AND_CLAUSES", &by_name["AND_CLAUSES"]).unwrap().equations.len(), 3);
        assert!(equations_of("NOT_SUC_0", &by_name["NOT_SUC_0"]).is_none());
    }

    #[test]
    fn too_small_is_an_error() {
        assert!(matches!(
            generate_corpus(1, 10, &CorpusConfig::default()),
            Err(CorpusError::TooSmall { .. })
        ));
    }

    #[test]
    fn splits_follow_index_prefix() {
        let db = generate_corpus(3, 100, &CorpusConfig::default()).unwrap();
        let sizes = db.split_sizes();
        assert_eq!(sizes[&Split::Train], 60);
        assert_eq!(sizes[&Split::Valid], 20);
        assert_eq!(sizes[&Split::Test], 20);
        let splits: Vec<Split> = db.theorems().iter().map(|t| t.split).collect();
        let mut sorted = splits.clone();
        sorted.sort();
        assert_eq!(splits, sorted);
    }
}
