//! Symbolic core: simply-typed terms, a rewrite engine, theorem databases
//! and the datasets derived from them.

pub mod corpus;
pub mod dataset;
pub mod db;
pub mod graph;
pub mod logic;
pub mod rewrite;
pub mod sexp;
pub mod term;
pub mod types;

pub use db::{Split, Theorem, TheoremDatabase};
pub use graph::{encode, FormulaGraph, Vocabulary};
pub use rewrite::{rewrite, success_bit, RewriteLimits, RewriteOutcome};
pub use sexp::{parse_term, print_term};
pub use term::Term;
pub use types::SimpleType;
