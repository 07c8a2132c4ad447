//! Approximate deduction carried out purely on embedding vectors.

use lrwt_core::graph::FormulaGraph;
use lrwt_models::{AlphaModel, Embedding, OmegaModel, SigmaModel, Space};

use crate::{EvalError, Result};

/// Where a chain of latent rewrites currently stands.
///
/// The L′ vector of a state reached by a step is produced on demand by the
/// next step, so `d` steps cost `d` outcome predictions and `d - 1`
/// alignments.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    pub depth: usize,
    pub vec_l: Option<Embedding>,
    vec_lp: Option<Embedding>,
    pub chain: Vec<String>,
}

impl PropagationState {
    /// Depth-0 state holding an L′ goal vector.
    pub fn from_embedding(v: Embedding) -> Result<Self> {
        v.expect(Space::LPrime, "propagation start")?;
        Ok(PropagationState {
            depth: 0,
            vec_l: None,
            vec_lp: Some(v),
            chain: Vec::new(),
        })
    }

    /// Embeds the starting formula with γ′.
    pub fn start(omega: &OmegaModel, goal: &FormulaGraph) -> Result<Self> {
        Self::from_embedding(omega.gamma.embed(&omega.store, goal)?)
    }

    /// The L′ vector if it has been computed already.
    pub fn vec_lp(&self) -> Option<&Embedding> {
        self.vec_lp.as_ref()
    }
}

/// One latent rewrite step with parameter `name`, whose π′ embedding is `param`.
pub fn propagate_step(
    state: &PropagationState,
    omega: &OmegaModel,
    alpha: &AlphaModel,
    name: &str,
    param: &Embedding,
) -> Result<PropagationState> {
    let goal = match (&state.vec_lp, &state.vec_l) {
        (Some(v), _) => v.clone(),
        (None, Some(l)) => alpha.translate(l)?,
        (None, None) => return Err(EvalError::EmptyState),
    };
    let (_, next) = omega.predict(&goal, param)?;
    let mut chain = state.chain.clone();
    chain.push(name.to_string());
    Ok(PropagationState {
        depth: state.depth + 1,
        vec_l: Some(next),
        vec_lp: None,
        chain,
    })
}

/// σ's logit for a goal given only as a vector of L.
pub fn score_with_embedding(sigma: &SigmaModel, v: &Embedding, param: &Embedding) -> Result<f64> {
    Ok(sigma.score(v, param)?)
}
