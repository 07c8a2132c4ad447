//! Message-passing embedding towers over formula graphs.

use std::fmt;
use std::rc::Rc;

use lrwt_autodiff::{Id, ParamStore, Tape, Tensor};
use lrwt_core::graph::FormulaGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerConfig {
    pub hops: usize,
    pub node_dim: usize,
    pub embed_dim: usize,
    pub vocab_size: usize,
}

impl TowerConfig {
    pub fn desk(vocab_size: usize) -> Self {
        TowerConfig {
            hops: 4,
            node_dim: 64,
            embed_dim: 64,
            vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hops == 0 || self.node_dim == 0 || self.embed_dim == 0 || self.vocab_size == 0 {
            return Err(ModelError::BadConfig(format!("tower sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Which latent space a vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    L,
    LPrime,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::L => "L",
            Space::LPrime => "L'",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub space: Space,
    pub vec: Vec<f64>,
}

impl Embedding {
    pub fn new(space: Space, vec: Vec<f64>) -> Self {
        Embedding { space, vec }
    }

    pub fn expect(&self, space: Space, context: &'static str) -> Result<&[f64]> {
        if self.space != space {
            return Err(ModelError::SpaceMismatch {
                context,
                expected: space,
                found: self.space,
            });
        }
        Ok(&self.vec)
    }

    pub fn distance(&self, other: &Embedding) -> f64 {
        Tensor::l2_distance(&self.vec, &other.vec)
    }
}

/// Several graphs laid out as one disjoint union.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub tokens: Rc<[usize]>,
    /// Parents of each node.
    pub in_lists: Rc<[Vec<usize>]>,
    /// Children of each node.
    pub out_lists: Rc<[Vec<usize>]>,
    /// Node range of graph `i` is `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&FormulaGraph]) -> Self {
        let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut tokens = Vec::with_capacity(total);
        let mut in_lists = vec![Vec::new(); total];
        let mut out_lists = vec![Vec::new(); total];
        let mut offsets = vec![0];
        for g in graphs {
            let base = tokens.len();
            tokens.extend_from_slice(&g.tokens);
            for e in &g.edges {
                in_lists[base + e.child].push(base + e.parent);
                out_lists[base + e.parent].push(base + e.child);
            }
            offsets.push(tokens.len());
        }
        GraphBatch {
            tokens: tokens.into(),
            in_lists: in_lists.into(),
            out_lists: out_lists.into(),
            offsets,
        }
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// One tower: a token table, `hops` rounds of self/in/out message passing,
/// a shared expansion layer, and max pooling over nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub name: String,
    pub space: Space,
    pub config: TowerConfig,
}

pub(crate) fn init_dense(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<()> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    store.insert(&format!("{name}.w"), Tensor::uniform(fan_in, fan_out, bound, rng))?;
    store.insert(&format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?;
    Ok(())
}

pub(crate) fn dense(tape: &mut Tape, store: &ParamStore, name: &str, x: Id) -> Result<Id> {
    let w = tape.param(store, &format!("{name}.w"))?;
    let b = tape.param(store, &format!("{name}.b"))?;
    let y = tape.matmul(x, w)?;
    Ok(tape.add_row(y, b)?)
}

impl Tower {
    pub fn new(name: &str, space: Space, config: TowerConfig) -> Self {
        Tower {
            name: name.to_string(),
            space,
            config,
        }
    }

    fn key(&self, part: &str) -> String {
        format!("{}.{part}", self.name)
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        self.config.validate()?;
        let c = &self.config;
        // a lookup has fan-in 1
        store.insert(&self.key("tok"), Tensor::uniform(c.vocab_size, c.node_dim, 1.0, rng))?;
        let bound = 1.0 / (c.node_dim as f64).sqrt();
        for h in 0..c.hops {
            for ch in ["self", "in", "out"] {
                store.insert(
                    &self.key(&format!("hop{h}.{ch}")),
                    Tensor::uniform(c.node_dim, c.node_dim, bound, rng),
                )?;
            }
            store.insert(&self.key(&format!("hop{h}.b")), Tensor::zeros(&[1, c.node_dim]))?;
        }
        init_dense(store, &self.key("expand"), c.node_dim, c.embed_dim, rng)
    }

    /// Records the tower on `tape`; the result has one row per graph.
    pub fn embed_batch(&self, tape: &mut Tape, store: &ParamStore, batch: &GraphBatch) -> Result<Id> {
        let vocab = self.config.vocab_size;
        if let Some(&token) = batch.tokens.iter().find(|&&t| t >= vocab) {
            return Err(ModelError::TokenOutOfRange { token, vocab });
        }
        let table = tape.param(store, &self.key("tok"))?;
        let mut h = tape.gather_rows(table, batch.tokens.clone())?;
        for hop in 0..self.config.hops {
            let ws = tape.param(store, &self.key(&format!("hop{hop}.self")))?;
            let wi = tape.param(store, &self.key(&format!("hop{hop}.in")))?;
            let wo = tape.param(store, &self.key(&format!("hop{hop}.out")))?;
            let b = tape.param(store, &self.key(&format!("hop{hop}.b")))?;
            let s = tape.matmul(h, ws)?;
            let inc = tape.neighbor_mean(h, batch.in_lists.clone())?;
            let inc = tape.matmul(inc, wi)?;
            let out = tape.neighbor_mean(h, batch.out_lists.clone())?;
            let out = tape.matmul(out, wo)?;
            let sum = tape.add(s, inc)?;
            let sum = tape.add(sum, out)?;
            let sum = tape.add_row(sum, b)?;
            h = tape.relu(sum);
        }
        let e = dense(tape, store, &self.key("expand"), h)?;
        Ok(tape.segment_max(e, &batch.offsets)?)
    }

    pub fn embed_many(&self, store: &ParamStore, graphs: &[&FormulaGraph]) -> Result<Vec<Embedding>> {
        if graphs.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let out = self.embed_batch(&mut tape, store, &GraphBatch::new(graphs))?;
        let v = tape.value(out);
        Ok((0..v.rows())
            .map(|r| Embedding::new(self.space, v.row_slice(r).to_vec()))
            .collect())
    }

    pub fn embed(&self, store: &ParamStore, g: &FormulaGraph) -> Result<Embedding> {
        Ok(self.embed_many(store, &[g])?.remove(0))
    }
}
