//! Central finite-difference comparison against the reverse pass.

use crate::optim::ParamStore;
use crate::tape::{Id, Tape};
use crate::tensor::Tensor;
use crate::AutodiffError;

/// Denominator floor of the relative error: gradients smaller than this are
/// compared absolutely.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares the gradient of every parameter entry in `store` with
/// `(f(θ + h) - f(θ - h)) / 2h`.
pub fn check<F, E>(store: &ParamStore, h: f64, loss: F) -> std::result::Result<GradCheck, E>
where
    F: Fn(&mut Tape, &ParamStore) -> std::result::Result<Id, E>,
    E: From<AutodiffError>,
{
    let eval = |s: &ParamStore| -> std::result::Result<f64, E> {
        let mut t = Tape::new();
        let l = loss(&mut t, s)?;
        Ok(t.value(l).data()[0])
    };
    let mut tape = Tape::new();
    let l = loss(&mut tape, store)?;
    let grads = tape.backward(l)?;
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut probe = store.clone();
    let names: Vec<String> = store.names().map(String::from).collect();
    for name in names {
        let analytic = grads.param_or_zero(store, &name)?;
        let base = store.value(&name)?.clone();
        for k in 0..base.len() {
            let mut plus = base.clone();
            plus.data_mut()[k] += h;
            probe.set(&name, plus)?;
            let lp = eval(&probe)?;
            let mut minus = base.clone();
            minus.data_mut()[k] -= h;
            probe.set(&name, minus)?;
            let lm = eval(&probe)?;
            let numeric = (lp - lm) / (2.0 * h);
            let err = relative_error(analytic.data()[k], numeric);
            if err > out.max_rel_error {
                out.max_rel_error = err;
                out.worst = Some((name.clone(), k));
            }
            out.checked += 1;
        }
        probe.set(&name, base)?;
    }
    Ok(out)
}

/// Store of named random matrices, handy for building toy checks.
pub fn random_store(shapes: &[(&str, usize, usize)], rng: &mut impl rand::Rng) -> ParamStore {
    let mut s = ParamStore::new();
    for &(name, r, c) in shapes {
        s.insert(name, Tensor::uniform(r, c, 1.0, rng)).expect("distinct names");
    }
    s
}
