//! Per-depth ranking quality of each goal-vector method, distance
//! diagnostics and the projection of propagated vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use lrwt_core::dataset::{ChainDataset, ParamTable, RewriteExample};
use lrwt_core::graph::Vocabulary;
use lrwt_core::{RewriteLimits, TheoremDatabase};
use lrwt_models::train::GraphCache;
use lrwt_models::{Embedding, ModelBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pca;
use crate::propagate::{propagate_step, PropagationState};
use crate::roc::{histogram, roc_auc, HistBin, RocCurve};
use crate::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    True,
    PredOneStep,
    PredMultiStep,
    RandomBaseline,
    UsageBaseline,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::True,
        Method::PredOneStep,
        Method::PredMultiStep,
        Method::RandomBaseline,
        Method::UsageBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::True => "true",
            Method::PredOneStep => "pred_one_step",
            Method::PredMultiStep => "pred_multi_step",
            Method::RandomBaseline => "random",
            Method::UsageBaseline => "usage",
        }
    }

    pub fn needs_models(self) -> bool {
        self != Method::UsageBaseline
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| EvalError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Statements scored per depth (the first ones of each layer).
    pub max_statements: usize,
    pub seed: u64,
    pub limits: RewriteLimits,
    pub hist_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_statements: 100,
            seed: 11,
            limits: RewriteLimits::default(),
            hist_bins: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthResult {
    pub depth: usize,
    pub method: Method,
    pub curve: RocCurve,
    pub n_pos: usize,
    pub n_neg: usize,
    pub hist: Vec<HistBin>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Row {
    pub depth: usize,
    pub mean_onestep: f64,
    pub mean_multistep: f64,
    pub mean_random: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjRow {
    pub x: f64,
    pub y: f64,
    pub depth: usize,
    pub dist_to_true: f64,
}

/// Success frequency of each parameter over the given pairs.
pub fn usage_frequencies(examples: &[RewriteExample]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for e in examples {
        let c = counts.entry(e.param.clone()).or_default();
        c.0 += e.label as u64;
        c.1 += 1;
    }
    counts.into_iter().map(|(p, (s, n))| (p, s as f64 / n as f64)).collect()
}

type NodeKey = (usize, usize);

pub struct Evaluator<'a> {
    chains: &'a ChainDataset,
    pool: &'a [String],
    usage: &'a BTreeMap<String, f64>,
    models: Option<&'a ModelBundle>,
    config: EvalConfig,
    db: &'a TheoremDatabase,
    table: ParamTable<'a>,
    graphs: GraphCache<'a>,
    labels: HashMap<NodeKey, Vec<u8>>,
    pi: Option<Vec<Embedding>>,
    pi_prime: HashMap<String, Embedding>,
    states: HashMap<NodeKey, PropagationState>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        db: &'a TheoremDatabase,
        vocab: &'a Vocabulary,
        chains: &'a ChainDataset,
        pool: &'a [String],
        usage: &'a BTreeMap<String, f64>,
        models: Option<&'a ModelBundle>,
        config: EvalConfig,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(EvalError::EmptyPool);
        }
        for d in 0..chains.layers.len() {
            if chains.layers[d].is_empty() {
                return Err(EvalError::EmptyLayer(d));
            }
        }
        Ok(Evaluator {
            chains,
            pool,
            usage,
            models,
            config,
            db,
            table: ParamTable::new(db),
            graphs: GraphCache::new(db, vocab),
            labels: HashMap::new(),
            pi: None,
            pi_prime: HashMap::new(),
            states: HashMap::new(),
        })
    }

    pub fn depth(&self) -> usize {
        self.chains.depth()
    }

    fn selected(&self, depth: usize) -> usize {
        self.chains.layers[depth].len().min(self.config.max_statements)
    }

    fn models(&self, m: Method) -> Result<&'a ModelBundle> {
        self.models.ok_or(EvalError::ModelsRequired(m.name()))
    }

    fn labels(&mut self, key: NodeKey) -> Result<&[u8]> {
        if !self.labels.contains_key(&key) {
            let goal = &self.chains.layers[key.0][key.1].statement;
            let row = self
                .pool
                .iter()
                .map(|p| self.table.label(goal, p, self.config.limits))
                .collect::<std::result::Result<Vec<u8>, _>>()?;
            self.labels.insert(key, row);
        }
        Ok(&self.labels[&key])
    }

    fn pool_pi(&mut self, models: &ModelBundle) -> Result<Vec<Embedding>> {
        if self.pi.is_none() {
            let gs = self.pool.iter().map(|p| self.graphs.param(p)).collect::<std::result::Result<Vec<_>, _>>()?;
            let refs: Vec<_> = gs.iter().map(|g| g.as_ref()).collect();
            self.pi = Some(models.sigma.pi.embed_many(&models.sigma.store, &refs)?);
        }
        Ok(self.pi.clone().unwrap_or_default())
    }

    fn param_prime(&mut self, models: &ModelBundle, name: &str) -> Result<Embedding> {
        if let Some(e) = self.pi_prime.get(name) {
            return Ok(e.clone());
        }
        let g = self.graphs.param(name)?;
        let e = models.omega.pi.embed(&models.omega.store, &g)?;
        self.pi_prime.insert(name.to_string(), e.clone());
        Ok(e)
    }

    fn gamma(&mut self, models: &ModelBundle, key: NodeKey) -> Result<Embedding> {
        let g = self.graphs.term(&self.chains.layers[key.0][key.1].statement);
        Ok(models.sigma.gamma.embed(&models.sigma.store, &g)?)
    }

    fn one_step(&mut self, models: &ModelBundle, key: NodeKey) -> Result<Embedding> {
        let node = &self.chains.layers[key.0][key.1];
        let parent = node.parent.ok_or(EvalError::EmptyLayer(key.0))?;
        let param = node.param.clone();
        let start = PropagationState::start(&models.omega, &self.graphs.term(&self.chains.layers[key.0 - 1][parent].statement))?;
        let p = self.param_prime(models, &param)?;
        let next = propagate_step(&start, &models.omega, &models.alpha, &param, &p)?;
        next.vec_l.ok_or(EvalError::EmptyState)
    }

    /// Propagated state of a chain node, reusing its ancestors' states.
    fn multi_step(&mut self, models: &ModelBundle, key: NodeKey) -> Result<PropagationState> {
        if let Some(s) = self.states.get(&key) {
            return Ok(s.clone());
        }
        let node = &self.chains.layers[key.0][key.1];
        let state = match node.parent {
            None => PropagationState::start(&models.omega, &self.graphs.term(&node.statement))?,
            Some(parent) => {
                let param = node.param.clone();
                let prev = self.multi_step(models, (key.0 - 1, parent))?;
                let p = self.param_prime(models, &param)?;
                propagate_step(&prev, &models.omega, &models.alpha, &param, &p)?
            }
        };
        self.states.insert(key, state.clone());
        Ok(state)
    }

    /// Pools the scores of every selected statement against the whole
    /// parameter pool into one ROC curve per depth.
    pub fn evaluate_depths(&mut self, method: Method) -> Result<Vec<DepthResult>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let usage: Vec<f64> = self.pool.iter().map(|p| self.usage.get(p).copied().unwrap_or(0.0)).collect();
        let mut out = Vec::with_capacity(self.depth());
        for depth in 1..=self.depth() {
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for idx in 0..self.selected(depth) {
                let key = (depth, idx);
                let scores = if method == Method::UsageBaseline {
                    usage.clone()
                } else {
                    let models = self.models(method)?;
                    let goal = match method {
                        Method::True => self.gamma(models, key)?,
                        Method::PredOneStep => self.one_step(models, key)?,
                        Method::PredMultiStep => self.multi_step(models, key)?.vec_l.ok_or(EvalError::EmptyState)?,
                        Method::RandomBaseline => {
                            let thms = self.db.theorems();
                            let t = &thms[rng.random_range(0..thms.len())];
                            let g = self.graphs.term(&t.statement);
                            models.sigma.gamma.embed(&models.sigma.store, &g)?
                        }
                        Method::UsageBaseline => unreachable!(),
                    };
                    let pi = self.pool_pi(models)?;
                    models.sigma.score_many(&goal, &pi)?
                };
                let labels = self.labels(key)?;
                for (s, &l) in scores.iter().zip(labels) {
                    if l == 1 {
                        pos.push(*s);
                    } else {
                        neg.push(*s);
                    }
                }
            }
            let curve = roc_auc(&pos, &neg)?;
            out.push(DepthResult {
                depth,
                method,
                n_pos: pos.len(),
                n_neg: neg.len(),
                hist: histogram(&pos, &neg, self.config.hist_bins),
                curve,
            });
        }
        Ok(out)
    }

    /// Mean distances to the true embedding per depth, next to the mean
    /// distance between random statement pairs of the same layer.
    pub fn l2_report(&mut self) -> Result<Vec<L2Row>> {
        let models = self.models(Method::PredMultiStep)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        let mut out = Vec::with_capacity(self.depth());
        for depth in 1..=self.depth() {
            let n = self.selected(depth);
            let mut truth = Vec::with_capacity(n);
            let (mut one, mut multi) = (0.0, 0.0);
            for idx in 0..n {
                let key = (depth, idx);
                let t = self.gamma(models, key)?;
                one += t.distance(&self.one_step(models, key)?);
                multi += t.distance(&self.multi_step(models, key)?.vec_l.ok_or(EvalError::EmptyState)?);
                truth.push(t);
            }
            let mut random = 0.0;
            if n >= 2 {
                for (i, t) in truth.iter().enumerate() {
                    let j = (i + 1 + rng.random_range(0..n - 1)) % n;
                    random += t.distance(&truth[j]);
                }
            }
            out.push(L2Row {
                depth,
                mean_onestep: one / n as f64,
                mean_multistep: multi / n as f64,
                mean_random: random / n as f64,
            });
        }
        Ok(out)
    }

    /// Principal projection of the propagated vectors of every depth.
    pub fn projection(&mut self) -> Result<Vec<ProjRow>> {
        let models = self.models(Method::PredMultiStep)?;
        let mut vecs = Vec::new();
        let mut labels = Vec::new();
        for depth in 1..=self.depth() {
            for idx in 0..self.selected(depth) {
                let key = (depth, idx);
                let v = self.multi_step(models, key)?.vec_l.ok_or(EvalError::EmptyState)?;
                let t = self.gamma(models, key)?;
                labels.push((depth, t.distance(&v)));
                vecs.push(v.vec);
            }
        }
        let p = pca::project(&vecs)?;
        Ok(p.coords
            .iter()
            .zip(labels)
            .map(|(c, (depth, dist_to_true))| ProjRow {
                x: c[0],
                y: c[1],
                depth,
                dist_to_true,
            })
            .collect())
    }
}
