//! Training loops: σ on success bits, ω on success bits plus result
//! embeddings from the frozen σ, and α on embedding pairs.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::rc::Rc;

use lrwt_autodiff::{adam_step, AdamConfig, Tape, Tensor};
use lrwt_core::dataset::{make_batches, Batch, BatchConfig, RewriteExample};
use lrwt_core::graph::{encode, FormulaGraph, Vocabulary};
use lrwt_core::{Term, TheoremDatabase};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::gnn::{Embedding, GraphBatch};
use crate::zoo::{omega_hidden, omega_loss, sigma_forward, sigma_loss, AlphaModel, OmegaModel, Pairs, SigmaModel};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: BatchConfig,
    pub adam: AdamConfig,
    /// Weight of the embedding error in the ω loss.
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2400,
            batch: BatchConfig { groups: 8, negatives: 7 },
            adam: AdamConfig {
                lr: 2e-3,
                ..AdamConfig::default()
            },
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Input noise standard deviation as a fraction of the input RMS.
    pub noise: f64,
}

impl Default for AlphaTrainConfig {
    fn default() -> Self {
        AlphaTrainConfig {
            steps: 1500,
            batch_size: 32,
            adam: AdamConfig::default(),
            noise: 0.01,
        }
    }
}

/// Per-step training losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub losses: Vec<f64>,
}

impl LossTrace {
    /// Mean loss of consecutive windows of `size` steps (a trailing partial
    /// window is dropped).
    pub fn window_means(&self, size: usize) -> Vec<f64> {
        self.losses
            .chunks_exact(size.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "step,loss")?;
        for (i, l) in self.losses.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Encodes terms and parameter theorems once.
pub struct GraphCache<'a> {
    db: &'a TheoremDatabase,
    vocab: &'a Vocabulary,
    terms: HashMap<String, Rc<FormulaGraph>>,
}

impl<'a> GraphCache<'a> {
    pub fn new(db: &'a TheoremDatabase, vocab: &'a Vocabulary) -> Self {
        GraphCache {
            db,
            vocab,
            terms: HashMap::new(),
        }
    }

    pub fn term(&mut self, t: &Term) -> Rc<FormulaGraph> {
        let vocab = self.vocab;
        self.terms
            .entry(t.alpha_key())
            .or_insert_with(|| Rc::new(encode(t, vocab)))
            .clone()
    }

    pub fn param(&mut self, name: &str) -> Result<Rc<FormulaGraph>> {
        let thm = self
            .db
            .get(name)
            .ok_or_else(|| ModelError::Data(format!("unknown parameter theorem `{name}`")))?;
        Ok(self.term(&thm.statement))
    }
}

fn batch_of(graphs: &[Rc<FormulaGraph>]) -> GraphBatch {
    let refs: Vec<&FormulaGraph> = graphs.iter().map(|g| g.as_ref()).collect();
    GraphBatch::new(&refs)
}

/// Cycles through freshly shuffled epochs of grouped batches.
struct BatchStream<'a> {
    examples: &'a [RewriteExample],
    pool: &'a [String],
    cfg: BatchConfig,
    seed: u64,
    epoch: u64,
    queue: std::vec::IntoIter<Batch>,
}

impl<'a> BatchStream<'a> {
    fn new(examples: &'a [RewriteExample], pool: &'a [String], cfg: BatchConfig, seed: u64) -> Result<Self> {
        let queue = make_batches(examples, pool, cfg, seed)?.into_iter();
        Ok(BatchStream {
            examples,
            pool,
            cfg,
            seed,
            epoch: 0,
            queue,
        })
    }

    fn next_batch(&mut self) -> Result<Batch> {
        if let Some(b) = self.queue.next() {
            return Ok(b);
        }
        self.epoch += 1;
        let seed = self.seed.wrapping_add(self.epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        self.queue = make_batches(self.examples, self.pool, self.cfg, seed)?.into_iter();
        self.queue.next().ok_or_else(|| ModelError::Data("no training batches".into()))
    }
}

/// What both pair models train on.
pub struct PairData<'a> {
    pub examples: &'a [RewriteExample],
    /// Names of theorems that negatives are sampled from.
    pub pool: &'a [String],
}

pub fn train_sigma(
    model: &mut SigmaModel,
    data: &PairData<'_>,
    graphs: &mut GraphCache<'_>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LossTrace> {
    let mut trace = LossTrace::default();
    if cfg.steps == 0 {
        return Ok(trace);
    }
    let mut stream = BatchStream::new(data.examples, data.pool, cfg.batch, seed)?;
    for _ in 0..cfg.steps {
        let batch = stream.next_batch()?;
        let goals: Vec<_> = batch.goals().into_iter().map(|t| graphs.term(t)).collect();
        let params = batch.params().into_iter().map(|p| graphs.param(p)).collect::<Result<Vec<_>>>()?;
        let pairs = Pairs::cross(goals.len(), params.len());
        let mut tape = Tape::new();
        let logits = sigma_forward(model, &mut tape, &batch_of(&goals), &batch_of(&params), &pairs)?;
        let loss = sigma_loss(&mut tape, logits, &batch.labels())?;
        trace.losses.push(tape.value(loss).data()[0]);
        let grads = tape.backward(loss)?;
        adam_step(&mut model.store, &grads, &cfg.adam)?;
    }
    Ok(trace)
}

pub fn train_omega(
    model: &mut OmegaModel,
    sigma: &SigmaModel,
    data: &PairData<'_>,
    graphs: &mut GraphCache<'_>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LossTrace> {
    let mut trace = LossTrace::default();
    if cfg.steps == 0 {
        return Ok(trace);
    }
    let k = model.config.tower.embed_dim;
    if sigma.config.tower.embed_dim != k {
        return Err(ModelError::BadConfig("σ and ω embedding sizes differ".into()));
    }
    let mut targets: HashMap<String, Vec<f64>> = HashMap::new();
    let mut stream = BatchStream::new(data.examples, data.pool, cfg.batch, seed)?;
    for _ in 0..cfg.steps {
        let batch = stream.next_batch()?;
        let goals: Vec<_> = batch.goals().into_iter().map(|t| graphs.term(t)).collect();
        let params = batch.params().into_iter().map(|p| graphs.param(p)).collect::<Result<Vec<_>>>()?;
        let mut target_rows = Vec::with_capacity(batch.groups.len() * k);
        for g in &batch.groups {
            let key = g.result.alpha_key();
            if !targets.contains_key(&key) {
                let graph = graphs.term(&g.result);
                targets.insert(key.clone(), sigma.gamma.embed(&sigma.store, &graph)?.vec);
            }
            target_rows.extend_from_slice(&targets[&key]);
        }
        let target = Tensor::matrix(batch.groups.len(), k, target_rows)?;
        let m = params.len();
        let pairs = Pairs::cross(goals.len(), m);
        let positive_rows: Vec<usize> = (0..batch.groups.len()).map(|i| i * m + batch.positive_column(i)).collect();

        let mut tape = Tape::new();
        let hidden = omega_hidden(model, &mut tape, &batch_of(&goals), &batch_of(&params), &pairs)?;
        let logits = model.success_head(&mut tape, hidden)?;
        let pos_hidden = tape.gather_rows(hidden, positive_rows.into())?;
        let preds = model.embedding_head(&mut tape, pos_hidden)?;
        let mask = vec![true; batch.groups.len()];
        let loss = omega_loss(&mut tape, logits, &batch.labels(), preds, &target, &mask, cfg.lambda)?;
        trace.losses.push(tape.value(loss).data()[0]);
        let grads = tape.backward(loss)?;
        adam_step(&mut model.store, &grads, &cfg.adam)?;
    }
    Ok(trace)
}

/// `(γ(T), γ′(T))` for each term.
pub fn alignment_pairs(sigma: &SigmaModel, omega: &OmegaModel, terms: &[Term], graphs: &mut GraphCache<'_>) -> Result<(Vec<Embedding>, Vec<Embedding>)> {
    let gs: Vec<_> = terms.iter().map(|t| graphs.term(t)).collect();
    let refs: Vec<&FormulaGraph> = gs.iter().map(|g| g.as_ref()).collect();
    Ok((
        sigma.gamma.embed_many(&sigma.store, &refs)?,
        omega.gamma.embed_many(&omega.store, &refs)?,
    ))
}

/// Mean ‖α(x) − y‖₂.
pub fn alignment_error(alpha: &AlphaModel, xs: &[Embedding], ys: &[Embedding]) -> Result<f64> {
    if xs.is_empty() {
        return Err(ModelError::Data("no alignment pairs".into()));
    }
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        total += alpha.translate(x)?.distance(y);
    }
    Ok(total / xs.len() as f64)
}

pub fn train_alpha(alpha: &mut AlphaModel, xs: &[Embedding], ys: &[Embedding], cfg: &AlphaTrainConfig, seed: u64) -> Result<LossTrace> {
    let mut trace = LossTrace::default();
    if cfg.steps == 0 {
        return Ok(trace);
    }
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(ModelError::Data("alignment inputs and targets must be nonempty and paired".into()));
    }
    let k = alpha.config.embed_dim;
    let x_rows = xs
        .iter()
        .map(|x| x.expect(crate::Space::L, "alpha training input"))
        .collect::<Result<Vec<_>>>()?;
    let y_rows = ys
        .iter()
        .map(|y| y.expect(crate::Space::LPrime, "alpha training target"))
        .collect::<Result<Vec<_>>>()?;
    let count = x_rows.iter().map(|r| r.len()).sum::<usize>();
    let rms = (x_rows.iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>() / count as f64).sqrt();
    let noise = Normal::new(0.0, (cfg.noise * rms).max(0.0)).map_err(|e| ModelError::BadConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::new();
    let bs = cfg.batch_size.clamp(1, xs.len());
    for _ in 0..cfg.steps {
        if order.len() < bs {
            order = (0..xs.len()).collect();
            order.shuffle(&mut rng);
        }
        let idx: Vec<usize> = order.split_off(order.len() - bs);
        let mut xd = Vec::with_capacity(bs * k);
        let mut yd = Vec::with_capacity(bs * k);
        for &i in &idx {
            xd.extend(x_rows[i].iter().map(|v| v + noise.sample(&mut rng)));
            yd.extend_from_slice(y_rows[i]);
        }
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(bs, k, xd)?);
        let y = tape.leaf(Tensor::matrix(bs, k, yd)?);
        let out = alpha.forward(&mut tape, x)?;
        let diff = tape.sub(out, y)?;
        let sq = tape.square(diff);
        let total = tape.sum_all(sq);
        let loss = tape.scale(total, 1.0 / bs as f64);
        trace.losses.push(tape.value(loss).data()[0]);
        let grads = tape.backward(loss)?;
        adam_step(&mut alpha.store, &grads, &cfg.adam)?;
    }
    Ok(trace)
}
