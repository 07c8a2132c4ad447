//! Maximally shared graph encoding of terms.
//!
//! Every distinct subterm of the alpha-normalized term becomes one node.
//! Bound variables are keyed by binder depth, so alpha-equivalent terms give
//! identical graphs; all variables carry the single `VAR` token.

use std::collections::{BTreeSet, HashMap};

use crate::db::{Split, TheoremDatabase};
use crate::term::{Term, TermKind};
use crate::types::SimpleType;

pub const APP: &str = "<APP>";
pub const ABS: &str = "<ABS>";
pub const VAR: &str = "<VAR>";
pub const OOV: &str = "<OOV>";

pub const APP_ID: usize = 0;
pub const ABS_ID: usize = 1;
pub const VAR_ID: usize = 2;
pub const OOV_ID: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_names(names: impl IntoIterator<Item = String>) -> Self {
        let mut tokens: Vec<String> = [APP, ABS, VAR, OOV].iter().map(|s| s.to_string()).collect();
        let extra: BTreeSet<String> = names.into_iter().filter(|n| !tokens.contains(n)).collect();
        tokens.extend(extra);
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token id for a constant name, `OOV_ID` when unknown.
    pub fn id(&self, name: &str) -> usize {
        self.index.get(name).copied().unwrap_or(OOV_ID)
    }
}

/// Vocabulary of constant names occurring in the training split.
pub fn build_vocabulary(db: &TheoremDatabase) -> Vocabulary {
    let names = db
        .split(Split::Train)
        .flat_map(|t| t.statement.constants().into_iter().map(|(n, _)| n));
    Vocabulary::from_names(names)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub slot: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaGraph {
    pub tokens: Vec<usize>,
    pub edges: Vec<Edge>,
    pub root: usize,
}

impl FormulaGraph {
    pub fn num_nodes(&self) -> usize {
        self.tokens.len()
    }

    /// Relabels nodes: old node `i` becomes `perm[i]`. Edge order is kept.
    pub fn permute(&self, perm: &[usize]) -> FormulaGraph {
        assert_eq!(perm.len(), self.tokens.len());
        let mut tokens = vec![0; self.tokens.len()];
        for (old, &new) in perm.iter().enumerate() {
            tokens[new] = self.tokens[old];
        }
        FormulaGraph {
            tokens,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    parent: perm[e.parent],
                    child: perm[e.child],
                    slot: e.slot,
                })
                .collect(),
            root: perm[self.root],
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum NodeKey {
    Const(String, SimpleType),
    Free(String, SimpleType),
    Bound(usize, SimpleType),
    App(usize, usize),
    Abs(usize, usize),
}

struct Encoder<'a> {
    vocab: &'a Vocabulary,
    nodes: HashMap<NodeKey, usize>,
    graph: FormulaGraph,
    binders: Vec<String>,
}

impl Encoder<'_> {
    fn intern(&mut self, key: NodeKey, token: usize, children: &[usize]) -> usize {
        if let Some(&id) = self.nodes.get(&key) {
            return id;
        }
        let id = self.graph.tokens.len();
        self.graph.tokens.push(token);
        for (slot, &child) in children.iter().enumerate() {
            self.graph.edges.push(Edge {
                parent: id,
                child,
                slot: slot as u8,
            });
        }
        self.nodes.insert(key, id);
        id
    }

    fn go(&mut self, t: &Term) -> usize {
        match t.kind() {
            TermKind::Var(v) => {
                let key = match self.binders.iter().rposition(|b| *b == v.name) {
                    Some(level) => NodeKey::Bound(level, v.ty.clone()),
                    None => NodeKey::Free(v.name.clone(), v.ty.clone()),
                };
                self.intern(key, VAR_ID, &[])
            }
            TermKind::Const { name, ty } => {
                let token = self.vocab.id(name);
                self.intern(NodeKey::Const(name.clone(), ty.clone()), token, &[])
            }
            TermKind::App(f, a) => {
                let fi = self.go(f);
                let ai = self.go(a);
                self.intern(NodeKey::App(fi, ai), APP_ID, &[fi, ai])
            }
            TermKind::Abs(v, b) => {
                let level = self.binders.len();
                let bi = self.intern(NodeKey::Bound(level, v.ty.clone()), VAR_ID, &[]);
                self.binders.push(v.name.clone());
                let body = self.go(b);
                self.binders.pop();
                self.intern(NodeKey::Abs(bi, body), ABS_ID, &[bi, body])
            }
        }
    }
}

/// Encodes a term as a maximally shared DAG with edges parent → child.
pub fn encode(t: &Term, vocab: &Vocabulary) -> FormulaGraph {
    let mut enc = Encoder {
        vocab,
        nodes: HashMap::new(),
        graph: FormulaGraph {
            tokens: Vec::new(),
            edges: Vec::new(),
            root: 0,
        },
        binders: Vec::new(),
    };
    enc.graph.root = enc.go(t);
    enc.graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexp::parse_term;

    fn vocab() -> Vocabulary {
        Vocabulary::from_names(["f", "g", "a", "c"].map(String::from))
    }

    #[test]
    fn constant_is_single_node() {
        let g = encode(&parse_term("(c c num)").unwrap(), &vocab());
        assert_eq!(g.num_nodes(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(g.tokens[0], vocab().id("c"));
    }

    #[test]
    fn shared_subterms_become_one_node() {
        // f (g a) (g a)
        let ga = "(app (c g (fun num num)) (c a num))";
        let t = parse_term(&format!("(app (app (c f (fun num (fun num num))) {ga}) {ga})")).unwrap();
        let g = encode(&t, &vocab());
        assert_eq!(g.num_nodes(), 6);
        assert_eq!(g.edges.len(), 6);
        assert!(g.num_nodes() < t.size());
        assert_eq!(g.root, g.num_nodes() - 1);
    }

    #[test]
    fn alpha_variants_encode_identically() {
        let v = vocab();
        let a = encode(&parse_term("(abs (v x num) (v x num))").unwrap(), &v);
        let b = encode(&parse_term("(abs (v y num) (v y num))").unwrap(), &v);
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_constants_are_oov_and_vars_are_blinded() {
        let t = parse_term("(app (c zz (fun num num)) (v q num))").unwrap();
        let g = encode(&t, &vocab());
        assert_eq!(g.tokens, vec![OOV_ID, VAR_ID, APP_ID]);
    }

    #[test]
    fn vocabulary_reserves_four_tokens() {
        let v = Vocabulary::from_names(Vec::new());
        assert_eq!(v.len(), 4);
        assert_eq!(v.id(APP), APP_ID);
        assert_eq!(v.id(OOV), OOV_ID);
    }
}
