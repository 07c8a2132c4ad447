//! Run configuration, read from TOML and written back fully resolved.

use std::path::{Path, PathBuf};

use lrwt_core::corpus::CorpusConfig;
use lrwt_core::dataset::ChainConfig;
use lrwt_core::RewriteLimits;
use lrwt_eval::EvalConfig;
use lrwt_models::train::{AlphaTrainConfig, TrainConfig};
use lrwt_models::zoo::{AlphaConfig, CombinerConfig, OmegaConfig, SigmaConfig};
use lrwt_models::TowerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the directory that default run directories
/// are created in.
pub const OUT_ROOT_ENV: &str = "LRWT_OUT_ROOT";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub corpus: CorpusSection,
    pub limits: RewriteLimits,
    pub chains: ChainConfig,
    pub model: ModelSection,
    pub sigma: TrainConfig,
    pub omega: TrainConfig,
    pub alpha: AlphaTrainConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out: None,
            corpus: CorpusSection::default(),
            limits: RewriteLimits::default(),
            chains: ChainConfig::default(),
            model: ModelSection::default(),
            sigma: TrainConfig::default(),
            omega: TrainConfig::default(),
            alpha: AlphaTrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub size: usize,
    #[serde(flatten)]
    pub generator: CorpusConfig,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            size: 300,
            generator: CorpusConfig::default(),
        }
    }
}

/// Sizes shared by the towers, plus the combiner and aligner widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hops: usize,
    pub node_dim: usize,
    pub embed_dim: usize,
    pub sigma_hidden: usize,
    pub sigma_layers: usize,
    pub omega_hidden: usize,
    pub omega_layers: usize,
    pub alpha_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TowerConfig::desk(1);
        let s = SigmaConfig::desk(1);
        let o = OmegaConfig::desk(1);
        ModelSection {
            hops: t.hops,
            node_dim: t.node_dim,
            embed_dim: t.embed_dim,
            sigma_hidden: s.combiner.hidden,
            sigma_layers: s.combiner.layers,
            omega_hidden: o.combiner.hidden,
            omega_layers: o.combiner.layers,
            alpha_hidden: AlphaConfig::desk(t.embed_dim).hidden,
        }
    }
}

impl ModelSection {
    fn tower(&self, vocab_size: usize) -> TowerConfig {
        TowerConfig {
            hops: self.hops,
            node_dim: self.node_dim,
            embed_dim: self.embed_dim,
            vocab_size,
        }
    }

    pub fn sigma(&self, vocab_size: usize) -> SigmaConfig {
        SigmaConfig {
            tower: self.tower(vocab_size),
            combiner: CombinerConfig {
                hidden: self.sigma_hidden,
                layers: self.sigma_layers,
            },
        }
    }

    pub fn omega(&self, vocab_size: usize) -> OmegaConfig {
        OmegaConfig {
            tower: self.tower(vocab_size),
            combiner: CombinerConfig {
                hidden: self.omega_hidden,
                layers: self.omega_layers,
            },
        }
    }

    pub fn alpha(&self) -> AlphaConfig {
        AlphaConfig {
            embed_dim: self.embed_dim,
            hidden: self.alpha_hidden,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub max_statements: usize,
    pub seed: u64,
    pub hist_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        EvalSection {
            max_statements: e.max_statements,
            seed: e.seed,
            hist_bins: e.hist_bins,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Data(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            max_statements: self.eval.max_statements,
            seed: self.eval.seed,
            limits: self.limits,
            hist_bins: self.eval.hist_bins,
        }
    }

    /// The run directory: the configured one, else a per-seed directory
    /// under `$LRWT_OUT_ROOT` (or `runs`).
    pub fn run_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out {
            return dir.clone();
        }
        let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(format!("seed-{}", self.seed))
    }

    // Seeds of the individual stages, all derived from the run seed.
    pub fn sigma_init_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
    pub fn omega_init_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }
    pub fn alpha_init_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }
    pub fn sigma_train_seed(&self) -> u64 {
        self.seed.wrapping_add(11)
    }
    pub fn omega_train_seed(&self) -> u64 {
        self.seed.wrapping_add(12)
    }
    pub fn alpha_train_seed(&self) -> u64 {
        self.seed.wrapping_add(13)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.out = Some("x/y".into());
        c.sigma.steps = 3;
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[sigma]\nsteps = 5\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.sigma.steps, 5);
        assert_eq!(c.sigma.batch, TrainConfig::default().batch);
        assert_eq!(c.corpus.size, 300);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 9\n").is_err());
    }
}
