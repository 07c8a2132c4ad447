//! Embedding towers, the σ/ω/α models, their training loops and checkpoints.

pub mod checkpoint;
pub mod gnn;
pub mod train;
pub mod zoo;

pub use gnn::{Embedding, GraphBatch, Space, Tower, TowerConfig};
pub use zoo::{AlphaModel, ModelBundle, OmegaModel, SigmaModel};

use lrwt_autodiff::AutodiffError;
use lrwt_core::dataset::DatasetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{context}: expected an embedding in {expected}, got {found}")]
    SpaceMismatch {
        context: &'static str,
        expected: Space,
        found: Space,
    },
    #[error("{context}: expected length {expected}, got {found}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("token id {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("{0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("checkpoint config hash {found:016x} does not match {expected:016x}")]
    ConfigHash { expected: u64, found: u64 },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// FNV-1a, used for configuration fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
