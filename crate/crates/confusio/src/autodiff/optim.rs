//! Named parameters with gradient slots and Adam moment accumulators.

use std::collections::HashMap;

use super::tape::{Gradients, NodeId, Tape};
use super::tensor::Tensor;
use super::AutodiffError;

struct Param {
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Insertion-ordered so iteration (and therefore training) is deterministic.
#[derive(Default)]
pub struct ParameterStore {
    order: Vec<String>,
    params: HashMap<String, Param>,
    step_count: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        let shape = value.shape().to_vec();
        let prev = self.params.insert(
            name.to_string(),
            Param {
                value,
                grad: Tensor::zeros(&shape),
                m: Tensor::zeros(&shape),
                v: Tensor::zeros(&shape),
            },
        );
        if prev.is_none() {
            self.order.push(name.to_string());
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.params[name].value
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self.params.get_mut(name).unwrap().value
    }

    pub fn grad(&self, name: &str) -> &Tensor {
        &self.params[name].grad
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(|s| s.as_str())
    }

    pub fn num_values(&self) -> usize {
        self.order.iter().map(|n| self.params[n].value.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad = Tensor::zeros(p.grad.shape());
        }
    }

    /// Record every parameter as a tape leaf; the binding maps names back to
    /// node ids for gradient collection.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        let mut ids = HashMap::new();
        for name in &self.order {
            let id = tape.leaf(self.params[name].value.clone());
            ids.insert(name.clone(), id);
        }
        Binding { ids }
    }

    /// Accumulate tape gradients into the store's gradient slots.
    pub fn accumulate(&mut self, tape: &Tape, grads: &Gradients, binding: &Binding) {
        for name in &self.order {
            let id = binding.ids[name];
            if let Some(g) = grads.get_opt(id) {
                self.params.get_mut(name).unwrap().grad.add_assign(g);
            }
            let _ = tape;
        }
    }

    /// One Adam update with bias correction; gradients stay in place so the
    /// caller decides when to zero them.
    pub fn adam_step(&mut self, lr: f64, cfg: AdamConfig) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for name in &self.order {
            let p = self.params.get_mut(name).unwrap();
            for i in 0..p.value.numel() {
                let g = p.grad.data()[i];
                let m = cfg.beta1 * p.m.data()[i] + (1.0 - cfg.beta1) * g;
                let v = cfg.beta2 * p.v.data()[i] + (1.0 - cfg.beta2) * g * g;
                p.m.data_mut()[i] = m;
                p.v.data_mut()[i] = v;
                let mhat = m / bc1;
                let vhat = v / bc2;
                p.value.data_mut()[i] -= lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Snapshot of values only (no optimizer state), for checkpoints.
    pub fn export(&self) -> Vec<(String, Tensor)> {
        self.order
            .iter()
            .map(|n| (n.clone(), self.params[n].value.clone()))
            .collect()
    }

    pub fn import(&mut self, tensors: Vec<(String, Tensor)>) -> Result<(), AutodiffError> {
        for (name, value) in tensors {
            match self.params.get_mut(&name) {
                Some(p) if p.value.shape() == value.shape() => p.value = value,
                Some(p) => {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "import",
                        detail: format!(
                            "{}: {:?} vs {:?}",
                            name,
                            p.value.shape(),
                            value.shape()
                        ),
                    })
                }
                None => {
                    self.insert(&name, value);
                }
            }
        }
        Ok(())
    }
}

pub struct Binding {
    ids: HashMap<String, NodeId>,
}

impl Binding {
    pub fn node(&self, name: &str) -> NodeId {
        self.ids[name]
    }
}

/// Max relative error between analytic gradients and central finite
/// differences of a scalar tape function, over all input coordinates.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId, AutodiffError>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let loss = f(&mut tape, x)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.get(&tape, x);

    let mut max_err: f64 = 0.0;
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += h;
        let mut minus = point.clone();
        minus.data_mut()[i] -= h;
        let eval = |p: Tensor| -> Result<f64, AutodiffError> {
            let mut t = Tape::new();
            let x = t.leaf(p);
            let l = f(&mut t, x)?;
            Ok(t.value(l).scalar_value())
        };
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        if !numeric.is_finite() {
            return Err(AutodiffError::NonFinite { op: "grad_check" });
        }
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / f64::max(1.0, a.abs());
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

/// Finite-difference check over every parameter in a store. `loss_fn` must
/// rebuild the forward pass from the current parameter values each call.
pub fn grad_check_params<F>(
    store: &mut ParameterStore,
    mut loss_fn: F,
    h: f64,
) -> Result<f64, AutodiffError>
where
    F: FnMut(&ParameterStore) -> Result<f64, AutodiffError>,
{
    let names: Vec<String> = store.names().map(String::from).collect();
    let mut max_err: f64 = 0.0;
    for name in names {
        let numel = store.get(&name).numel();
        for i in 0..numel {
            let orig = store.get(&name).data()[i];
            store.get_mut(&name).data_mut()[i] = orig + h;
            let lp = loss_fn(store)?;
            store.get_mut(&name).data_mut()[i] = orig - h;
            let lm = loss_fn(store)?;
            store.get_mut(&name).data_mut()[i] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let a = store.grad(&name).data()[i];
            let err = (a - numeric).abs() / f64::max(1.0, a.abs());
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}
