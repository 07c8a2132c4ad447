//! Pipeline stages behind the `lrwt` command. Every stage reads its inputs
//! from and writes its outputs to one run directory.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lrwt_autodiff::ParamStore;
use lrwt_core::corpus::generate_corpus;
use lrwt_core::dataset::{generate_chains, generate_pairs, positive_rate, read_examples, write_examples, ChainDataset, RewriteExample};
use lrwt_core::graph::{build_vocabulary, Vocabulary};
use lrwt_core::db::{load_database, save_database};
use lrwt_core::{Split, Term, TheoremDatabase};
use lrwt_eval::report;
use lrwt_eval::{usage_frequencies, DepthResult, Evaluator, Method};
use lrwt_models::checkpoint;
use lrwt_models::train::{alignment_pairs, train_alpha, train_omega, train_sigma, GraphCache, LossTrace, PairData};
use lrwt_models::{AlphaModel, Embedding, ModelBundle, OmegaModel, SigmaModel};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Data(_) => 3,
        }
    }
}

// Errors from the library crates: their I/O failures stay I/O failures,
// everything else is bad data.
macro_rules! classify {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                let mut src: Option<&(dyn std::error::Error + 'static)> = Some(&e);
                while let Some(s) = src {
                    if let Some(io) = s.downcast_ref::<std::io::Error>() {
                        return CliError::Io {
                            context: e.to_string(),
                            source: std::io::Error::new(io.kind(), io.to_string()),
                        };
                    }
                    src = s.source();
                }
                CliError::Data(e.to_string())
            }
        }
    )*};
}

classify!(
    lrwt_core::db::DbError,
    lrwt_core::dataset::DatasetError,
    lrwt_core::corpus::CorpusError,
    lrwt_models::ModelError,
    lrwt_eval::EvalError
);

pub type Result<T> = std::result::Result<T, CliError>;

pub const CORPUS_FILE: &str = "corpus.txt";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const CHAINS_FILE: &str = "chains.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ROC_FILE: &str = "roc.csv";
pub const HIST_FILE: &str = "histograms.csv";
pub const L2_FILE: &str = "l2.csv";
pub const PROJECTION_FILE: &str = "projection.csv";
pub const PLOT_DIR: &str = "plots";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Sigma,
    Omega,
    Alpha,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sigma => "sigma",
            ModelKind::Omega => "omega",
            ModelKind::Alpha => "alpha",
        }
    }

    pub fn checkpoint_file(self) -> String {
        format!("{}.ckpt", self.name())
    }

    pub fn loss_file(self) -> String {
        format!("{}_loss.csv", self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(ModelKind::Sigma),
            "omega" => Ok(ModelKind::Omega),
            "alpha" => Ok(ModelKind::Alpha),
            _ => Err(CliError::Usage(format!("unknown model `{s}` (sigma, omega or alpha)"))),
        }
    }
}

/// Squared alignment error before and after training α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFit {
    pub pairs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Mean ‖α(x) − y‖² over exact (noise-free) pairs.
pub fn alignment_loss(alpha: &AlphaModel, xs: &[Embedding], ys: &[Embedding]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let d = alpha.translate(x)?.distance(y);
        total += d * d;
    }
    Ok(total / xs.len().max(1) as f64)
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub results: Vec<DepthResult>,
    pub l2: Vec<lrwt_eval::L2Row>,
    pub projection: Vec<lrwt_eval::ProjRow>,
}

/// One run directory and the configuration it was produced with.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub dir: PathBuf,
}

impl Run {
    /// Creates the run directory and writes the resolved configuration.
    pub fn create(config: RunConfig) -> Result<Self> {
        let dir = config.run_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut resolved = config.clone();
        resolved.out = Some(dir.clone());
        let path = dir.join(config::CONFIG_FILE);
        std::fs::write(&path, resolved.to_toml()).map_err(|e| CliError::io(&path, e))?;
        Ok(Run { config: resolved, dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn require(&self, name: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.exists() {
            return Err(CliError::Io {
                context: format!("{} is missing; run `{stage}` first", p.display()),
                source: std::io::Error::from(std::io::ErrorKind::NotFound),
            });
        }
        Ok(p)
    }

    fn update_manifest(&self, key: &str, value: serde_json::Value) -> Result<()> {
        let path = self.path(MANIFEST_FILE);
        let mut m: BTreeMap<String, serde_json::Value> = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
            Err(_) => BTreeMap::new(),
        };
        m.insert(key.to_string(), value);
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn gen_corpus(&self) -> Result<TheoremDatabase> {
        let c = &self.config;
        let db = generate_corpus(c.seed, c.corpus.size, &c.corpus.generator)?;
        save_database(&db, &self.path(CORPUS_FILE))?;
        let sizes: BTreeMap<String, usize> = db.split_sizes().into_iter().map(|(s, n)| (format!("{s:?}").to_lowercase(), n)).collect();
        println!("corpus: {} theorems {:?}", db.len(), sizes);
        self.update_manifest("corpus", serde_json::json!({ "theorems": db.len(), "splits": sizes }))?;
        Ok(db)
    }

    pub fn load_corpus(&self) -> Result<TheoremDatabase> {
        Ok(load_database(&self.require(CORPUS_FILE, "gen-corpus")?)?)
    }

    pub fn gen_pairs(&self) -> Result<Vec<RewriteExample>> {
        let db = self.load_corpus()?;
        let pairs = generate_pairs(&db, Split::Train, self.config.limits);
        write_examples(&self.path(PAIRS_FILE), &pairs)?;
        let rate = positive_rate(&pairs);
        println!("pairs: {} (positive rate {:.4})", pairs.len(), rate);
        self.update_manifest("pairs", serde_json::json!({ "count": pairs.len(), "positive_rate": rate }))?;
        Ok(pairs)
    }

    pub fn load_pairs(&self) -> Result<Vec<RewriteExample>> {
        Ok(read_examples(&self.require(PAIRS_FILE, "gen-pairs")?)?)
    }

    pub fn gen_chains(&self) -> Result<ChainDataset> {
        let db = self.load_corpus()?;
        let chains = generate_chains(&db, &self.config.chains, self.config.limits, self.config.seed)?;
        write_examples(&self.path(CHAINS_FILE), &chains.to_examples())?;
        let sizes: Vec<usize> = chains.layers.iter().map(Vec::len).collect();
        println!("chains: layer sizes {sizes:?}");
        self.update_manifest("chains", serde_json::json!({ "layers": sizes }))?;
        Ok(chains)
    }

    pub fn load_chains(&self) -> Result<ChainDataset> {
        Ok(ChainDataset::from_examples(&read_examples(&self.require(CHAINS_FILE, "gen-chains")?)?)?)
    }

    fn pool(db: &TheoremDatabase) -> Vec<String> {
        db.split(Split::Train).map(|t| t.name.clone()).collect()
    }

    pub fn load_sigma(&self, vocab: &Vocabulary) -> Result<SigmaModel> {
        let cfg = self.config.model.sigma(vocab.len());
        let store = checkpoint::load(&self.require(&ModelKind::Sigma.checkpoint_file(), "train --model sigma")?, cfg.hash())?;
        Ok(SigmaModel::from_store(cfg, store)?)
    }

    pub fn load_omega(&self, vocab: &Vocabulary) -> Result<OmegaModel> {
        let cfg = self.config.model.omega(vocab.len());
        let store = checkpoint::load(&self.require(&ModelKind::Omega.checkpoint_file(), "train --model omega")?, cfg.hash())?;
        Ok(OmegaModel::from_store(cfg, store)?)
    }

    pub fn load_alpha(&self) -> Result<AlphaModel> {
        let cfg = self.config.model.alpha();
        let store = checkpoint::load(&self.require(&ModelKind::Alpha.checkpoint_file(), "train --model alpha")?, cfg.hash())?;
        Ok(AlphaModel::from_store(cfg, store)?)
    }

    pub fn load_models(&self, vocab: &Vocabulary) -> Result<ModelBundle> {
        Ok(ModelBundle {
            sigma: self.load_sigma(vocab)?,
            omega: self.load_omega(vocab)?,
            alpha: self.load_alpha()?,
        })
    }

    fn finish_training(&self, kind: ModelKind, store: &ParamStore, hash: u64, trace: &LossTrace) -> Result<()> {
        checkpoint::save(&self.path(&kind.checkpoint_file()), store, hash)?;
        trace.write_csv(&self.path(&kind.loss_file()))?;
        match trace.losses.last() {
            Some(l) => println!("{}: {} steps, final loss {l:.6}", kind.name(), trace.losses.len()),
            None => println!("{}: no training steps, wrote the initial parameters", kind.name()),
        }
        Ok(())
    }

    pub fn train(&self, kind: ModelKind) -> Result<Option<AlphaFit>> {
        let db = self.load_corpus()?;
        let vocab = build_vocabulary(&db);
        let mut graphs = GraphCache::new(&db, &vocab);
        let c = &self.config;
        match kind {
            ModelKind::Sigma => {
                let pairs = self.load_pairs()?;
                let pool = Self::pool(&db);
                let mut m = SigmaModel::new(c.model.sigma(vocab.len()), c.sigma_init_seed())?;
                let data = PairData { examples: &pairs, pool: &pool };
                let trace = train_sigma(&mut m, &data, &mut graphs, &c.sigma, c.sigma_train_seed())?;
                self.finish_training(kind, &m.store, m.config.hash(), &trace)?;
                Ok(None)
            }
            ModelKind::Omega => {
                let pairs = self.load_pairs()?;
                let pool = Self::pool(&db);
                let sigma = self.load_sigma(&vocab)?;
                let mut m = OmegaModel::new(c.model.omega(vocab.len()), c.omega_init_seed())?;
                let data = PairData { examples: &pairs, pool: &pool };
                let trace = train_omega(&mut m, &sigma, &data, &mut graphs, &c.omega, c.omega_train_seed())?;
                self.finish_training(kind, &m.store, m.config.hash(), &trace)?;
                Ok(None)
            }
            ModelKind::Alpha => {
                let pairs = self.load_pairs()?;
                let sigma = self.load_sigma(&vocab)?;
                let omega = self.load_omega(&vocab)?;
                let terms = alignment_terms(&db, &pairs);
                let (xs, ys) = alignment_pairs(&sigma, &omega, &terms, &mut graphs)?;
                let mut m = AlphaModel::new(c.model.alpha(), c.alpha_init_seed())?;
                let initial_loss = alignment_loss(&m, &xs, &ys)?;
                let trace = train_alpha(&mut m, &xs, &ys, &c.alpha, c.alpha_train_seed())?;
                let final_loss = alignment_loss(&m, &xs, &ys)?;
                self.finish_training(kind, &m.store, m.config.hash(), &trace)?;
                println!("alpha: {} pairs, squared error {initial_loss:.4} -> {final_loss:.4}", xs.len());
                Ok(Some(AlphaFit {
                    pairs: xs.len(),
                    initial_loss,
                    final_loss,
                }))
            }
        }
    }

    /// Evaluates one method, or all of them together with the distance
    /// report and the projection.
    pub fn eval(&self, method: Option<Method>) -> Result<EvalOutput> {
        let db = self.load_corpus()?;
        let vocab = build_vocabulary(&db);
        let chains = self.load_chains()?;
        let pairs = self.load_pairs()?;
        let usage = usage_frequencies(&pairs);
        let pool = Self::pool(&db);
        let methods: Vec<Method> = method.map_or_else(|| Method::ALL.to_vec(), |m| vec![m]);
        let models = if methods.iter().any(|m| m.needs_models()) {
            Some(self.load_models(&vocab)?)
        } else {
            None
        };
        let before = models.as_ref().map(ModelBundle::checksum);
        let mut ev = Evaluator::new(&db, &vocab, &chains, &pool, &usage, models.as_ref(), self.config.eval_config())?;
        let mut results = Vec::new();
        for m in &methods {
            results.extend(ev.evaluate_depths(*m)?);
        }
        let (l2, projection) = if method.is_none() {
            (ev.l2_report()?, ev.projection()?)
        } else {
            (Vec::new(), Vec::new())
        };
        drop(ev);
        if models.as_ref().map(ModelBundle::checksum) != before {
            return Err(CliError::Data("evaluation changed model parameters".into()));
        }
        report::write_metrics(&self.path(METRICS_FILE), &results)?;
        report::write_roc(&self.path(ROC_FILE), &results)?;
        report::write_histograms(&self.path(HIST_FILE), &results)?;
        if method.is_none() {
            report::write_l2(&self.path(L2_FILE), &l2)?;
            report::write_projection(&self.path(PROJECTION_FILE), &projection)?;
        }
        let scored: Vec<usize> = chains.layers.iter().skip(1).map(|l| l.len().min(self.config.eval.max_statements)).collect();
        self.update_manifest("eval", serde_json::json!({ "pool": pool.len(), "statements": scored }))?;
        for r in report::sorted(&results) {
            println!("depth {} {:<16} auc {:.4} ({} pos / {} neg)", r.depth, r.method.name(), r.curve.auc, r.n_pos, r.n_neg);
        }
        for r in &l2 {
            println!(
                "depth {} l2 one-step {:.4} multi-step {:.4} random {:.4}",
                r.depth, r.mean_onestep, r.mean_multistep, r.mean_random
            );
        }
        Ok(EvalOutput { results, l2, projection })
    }

    pub fn plot(&self) -> Result<Vec<PathBuf>> {
        let metrics = report::read_metrics(&self.require(METRICS_FILE, "eval")?)?;
        let roc = report::read_roc(&self.require(ROC_FILE, "eval")?)?;
        let hist = report::read_histograms(&self.require(HIST_FILE, "eval")?)?;
        let l2 = report::read_l2(&self.require(L2_FILE, "eval")?)?;
        let proj = report::read_projection(&self.require(PROJECTION_FILE, "eval")?)?;
        let dir = self.path(PLOT_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let files = lrwt_eval::plot::write_all(&dir, &metrics, &roc, &hist, &l2, &proj)?;
        for f in &files {
            println!("wrote {}", f.display());
        }
        Ok(files)
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<EvalOutput> {
        self.gen_corpus()?;
        self.gen_pairs()?;
        self.gen_chains()?;
        self.train(ModelKind::Sigma)?;
        self.train(ModelKind::Omega)?;
        self.train(ModelKind::Alpha)?;
        let out = self.eval(None)?;
        self.plot()?;
        Ok(out)
    }
}

/// Training statements and the distinct results of their successful rewrites.
pub fn alignment_terms(db: &TheoremDatabase, pairs: &[RewriteExample]) -> Vec<Term> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let results = pairs.iter().filter_map(|e| e.result.as_ref());
    for t in db.split(Split::Train).map(|t| &t.statement).chain(results) {
        if seen.insert(t.alpha_key()) {
            out.push(t.clone());
        }
    }
    out
}
