//! Persistent model parameters with accumulated gradients.
//!
//! Parameters outlive the per-sentence computation graphs: a graph borrows
//! values from the store during the forward pass and flushes gradients back
//! into it during the backward pass. Values are held behind `Arc` so a graph
//! can reference them without copying; the update step mutates them in place
//! once all graphs of the sentence are gone.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

struct Slot {
    name: String,
    value: Arc<Tensor>,
    grad: Tensor,
}

#[derive(Default)]
pub struct ParameterStore {
    slots: Vec<Slot>,
    by_name: HashMap<String, usize>,
}

/// Uniform samples in ±sqrt(6 / (rows + cols)).
pub fn glorot_init<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "glorot_init needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Ok(Tensor::matrix(rows, cols, data))
}

/// Where freshly registered parameters get their values: sampled (new model)
/// or taken out of a saved tensor map (loaded model). Funnelling both paths
/// through the same registration code keeps parameter names, shapes, and
/// ordering identical between a trained model and its reload.
pub enum ParamInit<'a> {
    Random(&'a mut ChaCha8Rng),
    Stored(HashMap<String, Tensor>),
}

impl ParamInit<'_> {
    pub fn matrix(
        &mut self,
        store: &mut ParameterStore,
        name: &str,
        rows: usize,
        cols: usize,
    ) -> Result<ParamId> {
        match self {
            ParamInit::Random(rng) => store.define_glorot_matrix(name, rows, cols, rng),
            ParamInit::Stored(map) => {
                let t = take_stored(map, name, &[rows, cols])?;
                store.define(name, t)
            }
        }
    }

    pub fn vector(&mut self, store: &mut ParameterStore, name: &str, len: usize) -> Result<ParamId> {
        match self {
            ParamInit::Random(rng) => store.define_glorot_vector(name, len, rng),
            ParamInit::Stored(map) => {
                let t = take_stored(map, name, &[len])?;
                store.define(name, t)
            }
        }
    }

    /// After all registrations: a stored map must be fully consumed.
    pub fn finish(self) -> Result<()> {
        match self {
            ParamInit::Random(_) => Ok(()),
            ParamInit::Stored(map) => {
                if map.is_empty() {
                    Ok(())
                } else {
                    let mut names: Vec<&String> = map.keys().collect();
                    names.sort();
                    Err(Error::BadModelFile(format!(
                        "unexpected tensors in model file: {names:?}"
                    )))
                }
            }
        }
    }
}

fn take_stored(map: &mut HashMap<String, Tensor>, name: &str, shape: &[usize]) -> Result<Tensor> {
    let t = map
        .remove(name)
        .ok_or_else(|| Error::BadModelFile(format!("missing tensor {name:?}")))?;
    if t.shape() != shape {
        return Err(Error::BadModelFile(format!(
            "tensor {name:?} has shape {:?}, expected {shape:?}",
            t.shape()
        )));
    }
    Ok(t)
}

impl ParameterStore {
    pub fn new() -> ParameterStore {
        ParameterStore::default()
    }

    /// Registers a named parameter. Names must be unique.
    pub fn define(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::invalid(format!("parameter {name:?} already defined")));
        }
        let id = ParamId(self.slots.len());
        let grad = Tensor::zeros(value.shape());
        self.slots.push(Slot {
            name: name.to_string(),
            value: Arc::new(value),
            grad,
        });
        self.by_name.insert(name.to_string(), id.0);
        Ok(id)
    }

    pub fn define_glorot_matrix<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        self.define(name, glorot_init(rows, cols, rng)?)
    }

    /// Vectors count as single-column structures for the init bound.
    pub fn define_glorot_vector<R: Rng>(
        &mut self,
        name: &str,
        len: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let m = glorot_init(len, 1, rng)?;
        self.define(name, Tensor::vector(m.data().to_vec()))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].value
    }

    pub fn shared_value(&self, id: ParamId) -> Arc<Tensor> {
        Arc::clone(&self.slots[id.0].value)
    }

    /// Mutable access to a parameter value (used by the update step and by
    /// finite-difference probes in tests).
    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        Arc::make_mut(&mut self.slots[id.0].value)
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].grad
    }

    pub fn accumulate_grad(&mut self, id: ParamId, delta: &Tensor) {
        self.slots[id.0].grad.add_assign(delta);
    }

    pub fn zero_grads(&mut self) {
        for slot in &mut self.slots {
            slot.grad.data_mut().fill(0.0);
        }
    }

    /// Global L2 norm over all gradient entries.
    pub fn grad_norm(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| s.grad.sq_norm())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for slot in &mut self.slots {
            slot.grad.scale(factor);
        }
    }

    /// One SGD step with L2 penalty: theta <- theta - lr * (grad + l2 * theta).
    /// Gradients are reset to zero afterwards.
    pub fn sgd_step(&mut self, lr: f64, l2: f64) {
        for slot in &mut self.slots {
            let value = Arc::make_mut(&mut slot.value);
            for (v, g) in value.data_mut().iter_mut().zip(slot.grad.data()) {
                *v -= lr * (g + l2 * *v);
            }
            slot.grad.data_mut().fill(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|s| (s.name.as_str(), &*s.value))
    }

    /// Cheap copy of all current values (shared until the next update).
    pub fn snapshot(&self) -> Vec<Arc<Tensor>> {
        self.slots.iter().map(|s| Arc::clone(&s.value)).collect()
    }

    pub fn restore(&mut self, snapshot: &[Arc<Tensor>]) {
        assert_eq!(snapshot.len(), self.slots.len(), "snapshot length mismatch");
        for (slot, saved) in self.slots.iter_mut().zip(snapshot) {
            assert_eq!(slot.value.shape(), saved.shape(), "snapshot shape mismatch");
            slot.value = Arc::clone(saved);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bound_for_one_by_five_is_one() {
        // sqrt(6 / (1 + 5)) = 1
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t = glorot_init(1, 5, &mut rng).unwrap();
            assert!(t.data().iter().all(|v| v.abs() <= 1.0), "sample out of bound");
        }
    }

    #[test]
    fn glorot_bound_for_two_by_two() {
        let bound = (6.0f64 / 4.0).sqrt(); // ~1.2247
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = glorot_init(2, 2, &mut rng).unwrap();
        assert!(t.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn glorot_mean_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = glorot_init(100, 100, &mut rng).unwrap();
        let mean = t.data().iter().sum::<f64>() / t.numel() as f64;
        assert!(mean.abs() < 0.05, "empirical mean {mean} too far from 0");
    }

    #[test]
    fn glorot_rejects_zero_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(glorot_init(0, 3, &mut rng).is_err());
        assert!(glorot_init(3, 0, &mut rng).is_err());
    }

    #[test]
    fn duplicate_name_is_rejected() {
        let mut store = ParameterStore::new();
        store.define("w", Tensor::vector(vec![1.0])).unwrap();
        assert!(store.define("w", Tensor::vector(vec![2.0])).is_err());
    }

    #[test]
    fn sgd_applies_decay_even_with_zero_grad() {
        let mut store = ParameterStore::new();
        let id = store.define("theta", Tensor::vector(vec![1.0])).unwrap();
        store.sgd_step(0.1, 1e-6);
        let v = store.value(id)[0];
        // 1 - 0.1 * (0 + 1e-6 * 1) = 0.9999999
        assert!((v - 0.9999999).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn sgd_step_resets_grads() {
        let mut store = ParameterStore::new();
        let id = store.define("theta", Tensor::vector(vec![2.0, -1.0])).unwrap();
        store.accumulate_grad(id, &Tensor::vector(vec![1.0, 4.0]));
        store.sgd_step(0.5, 0.0);
        assert_eq!(store.value(id).data(), &[1.5, -3.0]);
        assert_eq!(store.grad(id).data(), &[0.0, 0.0]);
    }

    #[test]
    fn snapshot_survives_updates() {
        let mut store = ParameterStore::new();
        let id = store.define("theta", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let snap = store.snapshot();
        store.accumulate_grad(id, &Tensor::vector(vec![1.0, 1.0]));
        store.sgd_step(1.0, 0.0);
        assert_eq!(store.value(id).data(), &[0.0, 1.0]);
        store.restore(&snap);
        assert_eq!(store.value(id).data(), &[1.0, 2.0]);
    }
}
