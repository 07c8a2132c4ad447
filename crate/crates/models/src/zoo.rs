//! The success model σ, the outcome model ω and the aligner α.

use std::cell::Cell;
use std::rc::Rc;

use lrwt_autodiff::{Id, ParamStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gnn::{dense, init_dense, Embedding, GraphBatch, Space, Tower, TowerConfig};
use crate::{fnv1a, ModelError, Result};

thread_local! {
    static E_PRIME_CALLS: Cell<u64> = const { Cell::new(0) };
    static ALPHA_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Vectors produced by the e′ head on this thread.
pub fn e_prime_calls() -> u64 {
    E_PRIME_CALLS.with(Cell::get)
}

/// Vectors translated by α on this thread.
pub fn alpha_calls() -> u64 {
    ALPHA_CALLS.with(Cell::get)
}

fn bump(counter: &'static std::thread::LocalKey<Cell<u64>>, n: usize) {
    counter.with(|c| c.set(c.get() + n as u64));
}

/// Row indices into the goal and parameter matrices for each scored pair.
#[derive(Debug, Clone)]
pub struct Pairs {
    pub goals: Rc<[usize]>,
    pub params: Rc<[usize]>,
}

impl Pairs {
    /// Every goal against every parameter, goal-major.
    pub fn cross(n_goals: usize, n_params: usize) -> Self {
        let goals: Vec<usize> = (0..n_goals).flat_map(|g| std::iter::repeat_n(g, n_params)).collect();
        let params: Vec<usize> = (0..n_goals).flat_map(|_| 0..n_params).collect();
        Pairs {
            goals: goals.into(),
            params: params.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinerConfig {
    pub hidden: usize,
    pub layers: usize,
}

fn init_combiner(store: &mut ParamStore, name: &str, k: usize, cfg: CombinerConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut fan_in = 3 * k;
    for i in 0..cfg.layers {
        init_dense(store, &format!("{name}.{i}"), fan_in, cfg.hidden, rng)?;
        fan_in = cfg.hidden;
    }
    Ok(())
}

/// relu MLP over `[g, p, g ⊙ p]` for each pair.
fn combine(tape: &mut Tape, store: &ParamStore, name: &str, layers: usize, goals: Id, params: Id, pairs: &Pairs) -> Result<Id> {
    let g = tape.gather_rows(goals, pairs.goals.clone())?;
    let p = tape.gather_rows(params, pairs.params.clone())?;
    let gp = tape.mul(g, p)?;
    let mut x = tape.concat_cols(&[g, p, gp])?;
    for i in 0..layers {
        let y = dense(tape, store, &format!("{name}.{i}"), x)?;
        x = tape.relu(y);
    }
    Ok(x)
}

fn stack(vectors: &[&[f64]], k: usize, context: &'static str) -> Result<Tensor> {
    let mut data = Vec::with_capacity(vectors.len() * k);
    for v in vectors {
        if v.len() != k {
            return Err(ModelError::DimMismatch {
                context,
                expected: k,
                found: v.len(),
            });
        }
        data.extend_from_slice(v);
    }
    Ok(Tensor::matrix(vectors.len(), k, data)?)
}

fn check_config_sizes(tower: &TowerConfig, comb: &CombinerConfig) -> Result<()> {
    tower.validate()?;
    if comb.hidden == 0 || comb.layers == 0 {
        return Err(ModelError::BadConfig(format!("combiner sizes must be positive: {comb:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaConfig {
    pub tower: TowerConfig,
    pub combiner: CombinerConfig,
}

impl SigmaConfig {
    pub fn desk(vocab_size: usize) -> Self {
        SigmaConfig {
            tower: TowerConfig::desk(vocab_size),
            combiner: CombinerConfig { hidden: 128, layers: 3 },
        }
    }

    pub fn hash(&self) -> u64 {
        fnv1a(format!("sigma:{}", serde_json::to_string(self).expect("plain data")).as_bytes())
    }
}

/// Success predictor σ(T, P) = p(c(γ(T), π(P))).
#[derive(Debug, Clone)]
pub struct SigmaModel {
    pub config: SigmaConfig,
    pub store: ParamStore,
    pub gamma: Tower,
    pub pi: Tower,
}

impl SigmaModel {
    fn skeleton(config: SigmaConfig) -> Self {
        SigmaModel {
            gamma: Tower::new("gamma", Space::L, config.tower),
            pi: Tower::new("pi", Space::L, config.tower),
            config,
            store: ParamStore::new(),
        }
    }

    pub fn new(config: SigmaConfig, seed: u64) -> Result<Self> {
        check_config_sizes(&config.tower, &config.combiner)?;
        let mut m = Self::skeleton(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.gamma.init(&mut m.store, &mut rng)?;
        m.pi.init(&mut m.store, &mut rng)?;
        init_combiner(&mut m.store, "c", config.tower.embed_dim, config.combiner, &mut rng)?;
        init_dense(&mut m.store, "p", config.combiner.hidden, 1, &mut rng)?;
        Ok(m)
    }

    /// Wraps an existing parameter store, checking that it has exactly the
    /// parameters this configuration needs.
    pub fn from_store(config: SigmaConfig, store: ParamStore) -> Result<Self> {
        let reference = Self::new(config, 0)?;
        same_layout(&reference.store, &store)?;
        let mut m = Self::skeleton(config);
        m.store = store;
        Ok(m)
    }

    /// Pair logits, one row per pair.
    pub fn logits(&self, tape: &mut Tape, goals: Id, params: Id, pairs: &Pairs) -> Result<Id> {
        let h = combine(tape, &self.store, "c", self.config.combiner.layers, goals, params, pairs)?;
        dense(tape, &self.store, "p", h)
    }

    /// Scores a goal vector from L against each parameter vector.
    pub fn score_many(&self, goal: &Embedding, params: &[Embedding]) -> Result<Vec<f64>> {
        let k = self.config.tower.embed_dim;
        let g = goal.expect(Space::L, "sigma goal")?;
        let ps = params
            .iter()
            .map(|p| p.expect(Space::L, "sigma parameter"))
            .collect::<Result<Vec<_>>>()?;
        if ps.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let gi = tape.leaf(stack(&[g], k, "sigma goal")?);
        let pi = tape.leaf(stack(&ps, k, "sigma parameter")?);
        let out = self.logits(&mut tape, gi, pi, &Pairs::cross(1, ps.len()))?;
        Ok(tape.value(out).data().to_vec())
    }

    pub fn score(&self, goal: &Embedding, param: &Embedding) -> Result<f64> {
        Ok(self.score_many(goal, std::slice::from_ref(param))?[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaConfig {
    pub tower: TowerConfig,
    pub combiner: CombinerConfig,
}

impl OmegaConfig {
    pub fn desk(vocab_size: usize) -> Self {
        OmegaConfig {
            tower: TowerConfig::desk(vocab_size),
            combiner: CombinerConfig { hidden: 256, layers: 3 },
        }
    }

    pub fn hash(&self) -> u64 {
        fnv1a(format!("omega:{}", serde_json::to_string(self).expect("plain data")).as_bytes())
    }
}

/// Outcome model ω(T, P) = (p′(c′(γ′(T), π′(P))), e′(c′(γ′(T), π′(P)))).
#[derive(Debug, Clone)]
pub struct OmegaModel {
    pub config: OmegaConfig,
    pub store: ParamStore,
    pub gamma: Tower,
    pub pi: Tower,
}

impl OmegaModel {
    fn skeleton(config: OmegaConfig) -> Self {
        OmegaModel {
            gamma: Tower::new("gamma'", Space::LPrime, config.tower),
            pi: Tower::new("pi'", Space::LPrime, config.tower),
            config,
            store: ParamStore::new(),
        }
    }

    pub fn new(config: OmegaConfig, seed: u64) -> Result<Self> {
        check_config_sizes(&config.tower, &config.combiner)?;
        let mut m = Self::skeleton(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.gamma.init(&mut m.store, &mut rng)?;
        m.pi.init(&mut m.store, &mut rng)?;
        let k = config.tower.embed_dim;
        init_combiner(&mut m.store, "c'", k, config.combiner, &mut rng)?;
        init_dense(&mut m.store, "p'", config.combiner.hidden, 1, &mut rng)?;
        init_dense(&mut m.store, "e'", config.combiner.hidden, k, &mut rng)?;
        Ok(m)
    }

    pub fn from_store(config: OmegaConfig, store: ParamStore) -> Result<Self> {
        let reference = Self::new(config, 0)?;
        same_layout(&reference.store, &store)?;
        let mut m = Self::skeleton(config);
        m.store = store;
        Ok(m)
    }

    pub fn hidden(&self, tape: &mut Tape, goals: Id, params: Id, pairs: &Pairs) -> Result<Id> {
        combine(tape, &self.store, "c'", self.config.combiner.layers, goals, params, pairs)
    }

    pub fn success_head(&self, tape: &mut Tape, hidden: Id) -> Result<Id> {
        dense(tape, &self.store, "p'", hidden)
    }

    /// The e′ head; its rows are vectors in L.
    pub fn embedding_head(&self, tape: &mut Tape, hidden: Id) -> Result<Id> {
        let out = dense(tape, &self.store, "e'", hidden)?;
        bump(&E_PRIME_CALLS, tape.value(out).rows());
        Ok(out)
    }

    /// Predicts success logits and result embeddings of one goal (in L′)
    /// against each parameter.
    pub fn predict_many(&self, goal: &Embedding, params: &[Embedding]) -> Result<Vec<(f64, Embedding)>> {
        let k = self.config.tower.embed_dim;
        let g = goal.expect(Space::LPrime, "omega goal")?;
        let ps = params
            .iter()
            .map(|p| p.expect(Space::LPrime, "omega parameter"))
            .collect::<Result<Vec<_>>>()?;
        if ps.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let gi = tape.leaf(stack(&[g], k, "omega goal")?);
        let pi = tape.leaf(stack(&ps, k, "omega parameter")?);
        let h = self.hidden(&mut tape, gi, pi, &Pairs::cross(1, ps.len()))?;
        let logits = self.success_head(&mut tape, h)?;
        let preds = self.embedding_head(&mut tape, h)?;
        let (lv, pv) = (tape.value(logits), tape.value(preds));
        Ok((0..ps.len())
            .map(|r| (lv.data()[r], Embedding::new(Space::L, pv.row_slice(r).to_vec())))
            .collect())
    }

    pub fn predict(&self, goal: &Embedding, param: &Embedding) -> Result<(f64, Embedding)> {
        Ok(self.predict_many(goal, std::slice::from_ref(param))?.remove(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaConfig {
    pub embed_dim: usize,
    pub hidden: usize,
}

impl AlphaConfig {
    pub fn desk(embed_dim: usize) -> Self {
        AlphaConfig {
            embed_dim,
            hidden: 2 * embed_dim,
        }
    }

    pub fn hash(&self) -> u64 {
        fnv1a(format!("alpha:{}", serde_json::to_string(self).expect("plain data")).as_bytes())
    }
}

/// Aligner α: L → L′.
#[derive(Debug, Clone)]
pub struct AlphaModel {
    pub config: AlphaConfig,
    pub store: ParamStore,
}

impl AlphaModel {
    pub fn new(config: AlphaConfig, seed: u64) -> Result<Self> {
        if config.embed_dim == 0 || config.hidden == 0 {
            return Err(ModelError::BadConfig(format!("aligner sizes must be positive: {config:?}")));
        }
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_dense(&mut store, "alpha.0", config.embed_dim, config.hidden, &mut rng)?;
        init_dense(&mut store, "alpha.1", config.hidden, config.embed_dim, &mut rng)?;
        Ok(AlphaModel { config, store })
    }

    pub fn from_store(config: AlphaConfig, store: ParamStore) -> Result<Self> {
        let reference = Self::new(config, 0)?;
        same_layout(&reference.store, &store)?;
        Ok(AlphaModel { config, store })
    }

    pub fn forward(&self, tape: &mut Tape, x: Id) -> Result<Id> {
        let h = dense(tape, &self.store, "alpha.0", x)?;
        let h = tape.relu(h);
        let out = dense(tape, &self.store, "alpha.1", h)?;
        bump(&ALPHA_CALLS, tape.value(out).rows());
        Ok(out)
    }

    pub fn translate(&self, v: &Embedding) -> Result<Embedding> {
        let x = v.expect(Space::L, "alpha input")?;
        let mut tape = Tape::new();
        let xi = tape.leaf(stack(&[x], self.config.embed_dim, "alpha input")?);
        let out = self.forward(&mut tape, xi)?;
        Ok(Embedding::new(Space::LPrime, tape.value(out).data().to_vec()))
    }
}

fn same_layout(reference: &ParamStore, store: &ParamStore) -> Result<()> {
    let a: Vec<(&str, &[usize])> = reference.iter().map(|(n, t)| (n, t.shape())).collect();
    let b: Vec<(&str, &[usize])> = store.iter().map(|(n, t)| (n, t.shape())).collect();
    if a != b {
        return Err(ModelError::BadCheckpoint(
            "parameter names or shapes do not match the configuration".into(),
        ));
    }
    Ok(())
}

/// The three trained models.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub sigma: SigmaModel,
    pub omega: OmegaModel,
    pub alpha: AlphaModel,
}

impl ModelBundle {
    pub fn checksum(&self) -> u64 {
        let parts = [self.sigma.store.checksum(), self.omega.store.checksum(), self.alpha.store.checksum()];
        fnv1a(&parts.iter().flat_map(|p| p.to_le_bytes()).collect::<Vec<u8>>())
    }
}

/// Mean binary cross-entropy of success logits.
pub fn sigma_loss(tape: &mut Tape, logits: Id, labels: &[f64]) -> Result<Id> {
    Ok(tape.bce_with_logits(logits, Rc::from(labels))?)
}

/// BCE plus `lambda` times the mean squared distance between predicted and
/// target embeddings over the positive rows. `targets` holds one row per
/// positive, in row order.
pub fn omega_loss(
    tape: &mut Tape,
    logits: Id,
    labels: &[f64],
    preds: Id,
    targets: &Tensor,
    positive_mask: &[bool],
    lambda: f64,
) -> Result<Id> {
    let bce = tape.bce_with_logits(logits, Rc::from(labels))?;
    let rows: Vec<usize> = positive_mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    if positive_mask.len() != tape.value(preds).rows() || rows.len() != targets.rows() {
        return Err(ModelError::DimMismatch {
            context: "omega_loss targets",
            expected: rows.len(),
            found: targets.rows(),
        });
    }
    if rows.is_empty() {
        return Ok(bce);
    }
    let picked = tape.gather_rows(preds, rows.clone().into())?;
    let t = tape.leaf(targets.clone());
    let diff = tape.sub(picked, t)?;
    let sq = tape.square(diff);
    let total = tape.sum_all(sq);
    let reg = tape.scale(total, lambda / rows.len() as f64);
    Ok(tape.add(bce, reg)?)
}

/// Scalar evaluation of [`sigma_loss`].
pub fn sigma_loss_value(logits: &[f64], labels: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.leaf(Tensor::row(logits.to_vec()));
    let l = sigma_loss(&mut tape, z, labels)?;
    Ok(tape.value(l).data()[0])
}

/// Scalar evaluation of [`omega_loss`]; `preds` has one vector per example.
pub fn omega_loss_value(
    logits: &[f64],
    labels: &[f64],
    preds: &[Vec<f64>],
    targets: &[Vec<f64>],
    positive_mask: &[bool],
    lambda: f64,
) -> Result<f64> {
    let k = preds.first().map_or(0, Vec::len);
    let mut tape = Tape::new();
    let z = tape.leaf(Tensor::row(logits.to_vec()));
    let p = tape.leaf(stack(&preds.iter().map(Vec::as_slice).collect::<Vec<_>>(), k, "omega_loss preds")?);
    let t = stack(&targets.iter().map(Vec::as_slice).collect::<Vec<_>>(), k, "omega_loss targets")?;
    let l = omega_loss(&mut tape, z, labels, p, &t, positive_mask, lambda)?;
    Ok(tape.value(l).data()[0])
}

/// Embeds goals and parameters with σ's towers and returns pair logits.
pub fn sigma_forward(m: &SigmaModel, tape: &mut Tape, goals: &GraphBatch, params: &GraphBatch, pairs: &Pairs) -> Result<Id> {
    let g = m.gamma.embed_batch(tape, &m.store, goals)?;
    let p = m.pi.embed_batch(tape, &m.store, params)?;
    m.logits(tape, g, p, pairs)
}

/// Embeds goals and parameters with ω's towers; returns the combiner output.
pub fn omega_hidden(m: &OmegaModel, tape: &mut Tape, goals: &GraphBatch, params: &GraphBatch, pairs: &Pairs) -> Result<Id> {
    let g = m.gamma.embed_batch(tape, &m.store, goals)?;
    let p = m.pi.embed_batch(tape, &m.store, params)?;
    m.hidden(tape, g, p, pairs)
}
