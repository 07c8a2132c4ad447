//! Rewrite datasets: database pairs, chained evaluation layers and grouped
//! training batches.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db::{Split, Theorem, TheoremDatabase};
use crate::rewrite::{as_equations, rewrite_with, success_bit, EquationSet, RewriteLimits, RewriteOutcome};
use crate::sexp::{parse_term, print_term, ParseError};
use crate::term::Term;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Term { line: usize, source: ParseError },
    #[error("chain layer {depth} is empty")]
    EmptyLayer { depth: usize },
    #[error("need at least {needed} positive examples, found {found}")]
    InsufficientPositives { needed: usize, found: usize },
    #[error("unknown theorem `{0}`")]
    UnknownTheorem(String),
    #[error("empty parameter pool")]
    EmptyPool,
    #[error("invalid batch configuration: groups {groups}, negatives {negatives}")]
    BadBatchConfig { groups: usize, negatives: usize },
    #[error("label mismatch for goal {goal} and parameter `{param}`: stored {stored}, engine {engine}")]
    LabelMismatch {
        goal: String,
        param: String,
        stored: u8,
        engine: u8,
    },
}

/// A goal, a parameter theorem, and the ground-truth outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteExample {
    pub goal: Term,
    pub param: String,
    pub label: u8,
    pub result: Option<Term>,
    pub step: u32,
    pub chain_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ExampleRecord {
    goal: String,
    param: String,
    label: u8,
    result: Option<String>,
    step: u32,
    chain_id: Option<String>,
}

impl RewriteExample {
    fn to_record(&self) -> ExampleRecord {
        ExampleRecord {
            goal: print_term(&self.goal),
            param: self.param.clone(),
            label: self.label,
            result: self.result.as_ref().map(print_term),
            step: self.step,
            chain_id: self.chain_id.clone(),
        }
    }

    fn from_record(r: ExampleRecord, line: usize) -> Result<Self, DatasetError> {
        let term = |s: &str| parse_term(s).map_err(|source| DatasetError::Term { line, source });
        let result = r.result.as_deref().map(term).transpose()?;
        if (r.label == 1) != result.is_some() || r.label > 1 {
            return Err(DatasetError::Malformed {
                line,
                message: "label must be 1 exactly when a result is present".into(),
            });
        }
        Ok(RewriteExample {
            goal: term(&r.goal)?,
            param: r.param,
            label: r.label,
            result,
            step: r.step,
            chain_id: r.chain_id,
        })
    }
}

pub fn write_examples(path: &Path, examples: &[RewriteExample]) -> Result<(), DatasetError> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for ex in examples {
        serde_json::to_writer(&mut out, &ex.to_record()).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_examples(path: &Path) -> Result<Vec<RewriteExample>, DatasetError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExampleRecord = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(RewriteExample::from_record(rec, i + 1)?);
    }
    Ok(out)
}

/// Precomputed equation sets for every theorem of a database.
pub struct ParamTable<'a> {
    db: &'a TheoremDatabase,
    equations: BTreeMap<&'a str, (usize, Option<EquationSet>)>,
}

impl<'a> ParamTable<'a> {
    pub fn new(db: &'a TheoremDatabase) -> Self {
        let equations = db
            .theorems()
            .iter()
            .map(|t| (t.name.as_str(), (t.index, as_equations(t))))
            .collect();
        ParamTable { db, equations }
    }

    pub fn db(&self) -> &'a TheoremDatabase {
        self.db
    }

    pub fn rewrite(&self, goal: &Term, param: &str, limits: RewriteLimits) -> Result<RewriteOutcome, DatasetError> {
        let (_, eqs) = self
            .equations
            .get(param)
            .ok_or_else(|| DatasetError::UnknownTheorem(param.to_string()))?;
        Ok(rewrite_with(goal, eqs.as_ref(), limits))
    }

    pub fn label(&self, goal: &Term, param: &str, limits: RewriteLimits) -> Result<u8, DatasetError> {
        Ok(success_bit(&self.rewrite(goal, param, limits)?))
    }
}

fn example_from_outcome(goal: &Term, param: &Theorem, outcome: RewriteOutcome, step: u32) -> RewriteExample {
    let result = match outcome {
        RewriteOutcome::Changed(t) => Some(t),
        _ => None,
    };
    RewriteExample {
        goal: goal.clone(),
        param: param.name.clone(),
        label: result.is_some() as u8,
        result,
        step,
        chain_id: None,
    }
}

/// All ordered pairs `(T, P)` of the split with `index(P) < index(T)`,
/// labelled by the rewrite engine. Goals are in index order, parameters in
/// index order within each goal.
pub fn generate_pairs(db: &TheoremDatabase, split: Split, limits: RewriteLimits) -> Vec<RewriteExample> {
    let members: Vec<&Theorem> = db.split(split).collect();
    let eqs: Vec<Option<EquationSet>> = members.iter().map(|t| as_equations(t)).collect();
    let mut out = Vec::with_capacity(members.len() * members.len().saturating_sub(1) / 2);
    for (ti, goal) in members.iter().enumerate() {
        for (pi, param) in members[..ti].iter().enumerate() {
            debug_assert!(param.index < goal.index);
            let outcome = rewrite_with(&goal.statement, eqs[pi].as_ref(), limits);
            out.push(example_from_outcome(&goal.statement, param, outcome, 0));
        }
    }
    out
}

/// Fraction of examples with label 1.
pub fn positive_rate(examples: &[RewriteExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples.iter().filter(|e| e.label == 1).count() as f64 / examples.len() as f64
}

/// Recomputes the labels of a random `fraction` of examples (at least one).
pub fn verify_labels(
    examples: &[RewriteExample],
    table: &ParamTable<'_>,
    limits: RewriteLimits,
    fraction: f64,
    seed: u64,
) -> Result<usize, DatasetError> {
    if examples.is_empty() {
        return Ok(0);
    }
    let n = ((examples.len() as f64 * fraction).ceil() as usize).clamp(1, examples.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in sample(&mut rng, examples.len(), n) {
        let ex = &examples[i];
        let outcome = table.rewrite(&ex.goal, &ex.param, limits)?;
        let engine = success_bit(&outcome);
        if engine != ex.label || outcome.result() != ex.result.as_ref() {
            return Err(DatasetError::LabelMismatch {
                goal: print_term(&ex.goal),
                param: ex.param.clone(),
                stored: ex.label,
                engine,
            });
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub depth: usize,
    pub statements_per_layer: usize,
    pub params_per_statement: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            depth: 4,
            statements_per_layer: 200,
            params_per_statement: 40,
        }
    }
}

/// One statement of a chain layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNode {
    /// Hierarchical id: `c<k>` for roots, `<parent id>.<j>` below.
    pub id: String,
    pub statement: Term,
    /// Index of the parent in the previous layer.
    pub parent: Option<usize>,
    /// Parameter that rewrote the parent into this statement; for roots the
    /// name of the source theorem.
    pub param: String,
}

/// Layers `D_0 ..= D_r`; every statement of layer `i > 0` is the changed
/// result of rewriting its parent in layer `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDataset {
    pub layers: Vec<Vec<ChainNode>>,
}

impl ChainDataset {
    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn parent(&self, layer: usize, idx: usize) -> Option<&ChainNode> {
        let p = self.layers[layer][idx].parent?;
        Some(&self.layers[layer - 1][p])
    }

    /// Root statement and the parameters applied along the path to `(layer, idx)`.
    pub fn path(&self, layer: usize, idx: usize) -> (&ChainNode, Vec<&str>) {
        let mut params = Vec::with_capacity(layer);
        let (mut l, mut i) = (layer, idx);
        while l > 0 {
            let node = &self.layers[l][i];
            params.push(node.param.as_str());
            i = node.parent.expect("non-root nodes have parents");
            l -= 1;
        }
        params.reverse();
        (&self.layers[0][i], params)
    }

    pub fn to_examples(&self) -> Vec<RewriteExample> {
        let mut out = Vec::new();
        for (depth, layer) in self.layers.iter().enumerate() {
            for node in layer {
                let ex = match node.parent {
                    None => RewriteExample {
                        goal: node.statement.clone(),
                        param: node.param.clone(),
                        label: 0,
                        result: None,
                        step: 0,
                        chain_id: Some(node.id.clone()),
                    },
                    Some(p) => RewriteExample {
                        goal: self.layers[depth - 1][p].statement.clone(),
                        param: node.param.clone(),
                        label: 1,
                        result: Some(node.statement.clone()),
                        step: depth as u32,
                        chain_id: Some(node.id.clone()),
                    },
                };
                out.push(ex);
            }
        }
        out
    }

    pub fn from_examples(examples: &[RewriteExample]) -> Result<Self, DatasetError> {
        let mut layers: Vec<Vec<ChainNode>> = Vec::new();
        let mut ids: Vec<BTreeMap<String, usize>> = Vec::new();
        for (line, ex) in examples.iter().enumerate() {
            let bad = |m: &str| DatasetError::Malformed {
                line: line + 1,
                message: m.to_string(),
            };
            let step = ex.step as usize;
            let id = ex.chain_id.clone().ok_or_else(|| bad("chain record without chain_id"))?;
            if step > layers.len() {
                return Err(bad("chain layers out of order"));
            }
            if step == layers.len() {
                layers.push(Vec::new());
                ids.push(BTreeMap::new());
            }
            let (statement, parent) = if step == 0 {
                (ex.goal.clone(), None)
            } else {
                let parent_id = id.rsplit_once('.').map(|(p, _)| p).ok_or_else(|| bad("chain id has no parent"))?;
                let parent = *ids[step - 1].get(parent_id).ok_or_else(|| bad("unknown parent"))?;
                let result = ex.result.clone().ok_or_else(|| bad("chain step without result"))?;
                if layers[step - 1][parent].statement != ex.goal {
                    return Err(bad("goal does not match parent statement"));
                }
                (result, Some(parent))
            };
            ids[step].insert(id.clone(), layers[step].len());
            layers[step].push(ChainNode {
                id,
                statement,
                parent,
                param: ex.param.clone(),
            });
        }
        Ok(ChainDataset { layers })
    }
}

/// Builds chained layers starting from the validation split, rewriting with
/// parameters drawn from the training split.
pub fn generate_chains(
    db: &TheoremDatabase,
    config: &ChainConfig,
    limits: RewriteLimits,
    seed: u64,
) -> Result<ChainDataset, DatasetError> {
    let pool: Vec<&Theorem> = db.split(Split::Train).collect();
    if pool.is_empty() {
        return Err(DatasetError::EmptyPool);
    }
    let pool_eqs: Vec<Option<EquationSet>> = pool.iter().map(|t| as_equations(t)).collect();
    let roots: Vec<ChainNode> = db
        .split(Split::Valid)
        .enumerate()
        .map(|(k, t)| ChainNode {
            id: format!("c{k}"),
            statement: t.statement.clone(),
            parent: None,
            param: t.name.clone(),
        })
        .collect();
    if roots.is_empty() {
        return Err(DatasetError::EmptyLayer { depth: 0 });
    }
    let mut layers = vec![roots];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for depth in 1..=config.depth {
        let prev = &layers[depth - 1];
        let mut chosen: Vec<usize> = sample(&mut rng, prev.len(), config.statements_per_layer.min(prev.len())).into_vec();
        chosen.sort_unstable();
        let mut seen = HashSet::new();
        let mut duplicates = 0usize;
        let mut layer = Vec::new();
        for parent in chosen {
            let mut params: Vec<usize> =
                sample(&mut rng, pool.len(), config.params_per_statement.min(pool.len())).into_vec();
            params.sort_unstable();
            let mut child = 0usize;
            for pi in params {
                let goal = &prev[parent].statement;
                if let RewriteOutcome::Changed(result) = rewrite_with(goal, pool_eqs[pi].as_ref(), limits) {
                    if !seen.insert(result.alpha_key()) {
                        duplicates += 1;
                        continue;
                    }
                    layer.push(ChainNode {
                        id: format!("{}.{child}", prev[parent].id),
                        statement: result,
                        parent: Some(parent),
                        param: pool[pi].name.clone(),
                    });
                    child += 1;
                }
            }
        }
        log::info!("chain layer {depth}: {} statements, {duplicates} duplicates dropped", layer.len());
        if layer.is_empty() {
            return Err(DatasetError::EmptyLayer { depth });
        }
        layers.push(layer);
    }
    Ok(ChainDataset { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub groups: usize,
    pub negatives: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            groups: 16,
            negatives: 15,
        }
    }
}

impl BatchConfig {
    pub fn group_size(&self) -> usize {
        self.negatives + 1
    }

    pub fn params_per_batch(&self) -> usize {
        self.groups * self.group_size()
    }
}

/// One goal with its positive parameter and sampled negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub goal: Term,
    pub positive: String,
    pub result: Term,
    pub negatives: Vec<String>,
}

/// A training batch. Every goal is scored against every parameter of the
/// batch; only a goal's own positive is labelled 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub groups: Vec<Group>,
}

impl Batch {
    /// Parameters in column order: each group contributes its positive
    /// followed by its negatives.
    pub fn params(&self) -> Vec<&str> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::once(g.positive.as_str()).chain(g.negatives.iter().map(String::as_str)))
            .collect()
    }

    pub fn goals(&self) -> Vec<&Term> {
        self.groups.iter().map(|g| &g.goal).collect()
    }

    /// Column of group `i`'s positive parameter.
    pub fn positive_column(&self, i: usize) -> usize {
        self.groups[..i].iter().map(|g| 1 + g.negatives.len()).sum()
    }

    /// Row-major `goals × params` label matrix.
    pub fn labels(&self) -> Vec<f64> {
        let cols = self.params().len();
        let mut out = vec![0.0; self.groups.len() * cols];
        for i in 0..self.groups.len() {
            out[i * cols + self.positive_column(i)] = 1.0;
        }
        out
    }

    /// Number of embedding-tower evaluations: one per goal and one per parameter slot.
    pub fn tower_calls(&self) -> usize {
        self.groups.len() + self.params().len()
    }

    /// Number of combiner evaluations: the full goal × parameter cross product.
    pub fn combiner_calls(&self) -> usize {
        self.groups.len() * self.params().len()
    }
}

/// Shuffles the positive examples into batches of `groups` groups, dropping
/// the remainder. Negatives for a goal are drawn uniformly from `pool`
/// excluding the goal's known positives.
pub fn make_batches(
    examples: &[RewriteExample],
    pool: &[String],
    cfg: BatchConfig,
    seed: u64,
) -> Result<Vec<Batch>, DatasetError> {
    if cfg.groups < 2 || cfg.negatives < 1 {
        return Err(DatasetError::BadBatchConfig {
            groups: cfg.groups,
            negatives: cfg.negatives,
        });
    }
    if pool.is_empty() {
        return Err(DatasetError::EmptyPool);
    }
    let positives: Vec<&RewriteExample> = examples.iter().filter(|e| e.label == 1).collect();
    if positives.len() < cfg.groups {
        return Err(DatasetError::InsufficientPositives {
            needed: cfg.groups,
            found: positives.len(),
        });
    }
    let mut known: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for p in &positives {
        known.entry(p.goal.alpha_key()).or_default().insert(p.param.as_str());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..positives.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut batches = Vec::with_capacity(positives.len() / cfg.groups);
    for chunk in order.chunks_exact(cfg.groups) {
        let mut groups = Vec::with_capacity(cfg.groups);
        for &i in chunk {
            let ex = positives[i];
            let excluded = &known[&ex.goal.alpha_key()];
            let candidates: Vec<&String> = pool.iter().filter(|p| !excluded.contains(p.as_str())).collect();
            let negatives = if candidates.is_empty() {
                (0..cfg.negatives).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
            } else if candidates.len() >= cfg.negatives {
                sample(&mut rng, candidates.len(), cfg.negatives)
                    .into_iter()
                    .map(|k| candidates[k].clone())
                    .collect()
            } else {
                (0..cfg.negatives)
                    .map(|_| candidates[rng.random_range(0..candidates.len())].clone())
                    .collect()
            };
            groups.push(Group {
                goal: ex.goal.clone(),
                positive: ex.param.clone(),
                result: ex.result.clone().expect("positive examples carry results"),
                negatives,
            });
        }
        batches.push(Batch { groups });
    }
    Ok(batches)
}
