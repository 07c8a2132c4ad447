use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tape::Gradients;
use crate::tensor::Tensor;
use crate::{AutodiffError, Result};

#[derive(Debug, Clone)]
struct Slot {
    value: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

/// Named parameters with Adam moments.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    slots: BTreeMap<String, Slot>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.slots.contains_key(name) {
            return Err(AutodiffError::DuplicateParam(name.to_string()));
        }
        let zeros = Tensor::zeros(value.shape());
        self.slots.insert(
            name.to_string(),
            Slot {
                m: zeros.clone(),
                v: zeros,
                value,
                step: 0,
            },
        );
        Ok(())
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        self.slots
            .get(name)
            .map(|s| &s.value)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    /// Replaces a parameter value; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .slots
            .get_mut(name)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))?;
        if slot.value.shape() != value.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "set",
                left: slot.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        slot.value = value;
        Ok(())
    }

    pub fn step(&self, name: &str) -> Option<u64> {
        self.slots.get(name).map(|s| s.step)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|(k, s)| (k.as_str(), &s.value))
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    /// FNV-1a over names and value bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, slot) in &self.slots {
            eat(name.as_bytes());
            for x in slot.value.data() {
                eat(&x.to_bits().to_le_bytes());
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of every parameter in `store`. Parameters missing from
/// `grads` are treated as having zero gradient.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    for (name, slot) in store.slots.iter_mut() {
        let g = grads.param(name);
        if let Some(g) = g {
            if g.shape() != slot.value.shape() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "adam_step",
                    left: slot.value.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
        }
        slot.step += 1;
        let t = slot.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let n = slot.value.len();
        for k in 0..n {
            let gk = g.map_or(0.0, |g| g.data()[k]);
            let m = &mut slot.m.data_mut()[k];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gk;
            let mk = *m;
            let v = &mut slot.v.data_mut()[k];
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gk * gk;
            let vk = *v;
            let update = cfg.lr * (mk / c1) / ((vk / c2).sqrt() + cfg.eps);
            slot.value.data_mut()[k] -= update;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;

    fn one_param(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(v)).unwrap();
        s
    }

    fn grad_of_scaled_sum(store: &ParamStore, scale: f64) -> Gradients {
        let mut t = Tape::new();
        let w = t.param(store, "w").unwrap();
        let s = t.scale(w, scale);
        let l = t.sum_all(s);
        t.backward(l).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = one_param(0.7);
        let g = grad_of_scaled_sum(&s, 0.0);
        adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
        assert_eq!(s.value("w").unwrap().data(), &[0.7]);
        assert_eq!(s.step("w"), Some(1));
    }

    #[test]
    fn first_step_regression() {
        let mut s = one_param(0.0);
        let g = grad_of_scaled_sum(&s, 1.0);
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut s, &g, &cfg).unwrap();
        // m̂ = v̂ = 1 after bias correction, so the step is lr / (1 + eps).
        assert_eq!(s.value("w").unwrap().data()[0], -0.099_999_999_000_000_02);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut s = one_param(1.0);
        let mut prev = 1.0;
        for _ in 0..200 {
            let g = grad_of_scaled_sum(&s, 3.0);
            adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
            let now = s.value("w").unwrap().data()[0];
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn duplicate_and_shape_errors() {
        let mut s = one_param(1.0);
        assert!(s.insert("w", Tensor::scalar(0.0)).is_err());
        assert!(s.set("w", Tensor::zeros(&[2, 2])).is_err());
        assert!(s.value("nope").is_err());
    }

    #[test]
    fn checksum_tracks_values() {
        let a = one_param(1.0);
        let mut b = a.clone();
        assert_eq!(a.checksum(), b.checksum());
        b.set("w", Tensor::scalar(1.0 + 1e-15)).unwrap();
        assert_ne!(a.checksum(), b.checksum());
    }
}
