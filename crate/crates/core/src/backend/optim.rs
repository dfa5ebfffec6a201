//! Adam with bias correction.

use super::params::{Grads, ParamStore};
use super::tensor::{lit, Real};
use crate::error::{shape_err, Result};

#[derive(Clone, Debug)]
pub struct AdamState<T: Real> {
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>, lr: f64, beta1: f64, beta2: f64, eps_adam: f64) -> Self {
        let zeros = |s: &ParamStore<T>| s.iter().map(|(_, t)| vec![T::zero(); t.numel()]).collect();
        AdamState { step_count: 0, lr, beta1, beta2, eps_adam, m: zeros(store), v: zeros(store) }
    }

    pub fn first_moment(&self, idx: usize) -> &[T] {
        &self.m[idx]
    }

    pub fn second_moment(&self, idx: usize) -> &[T] {
        &self.v[idx]
    }

    /// One bias-corrected update of every parameter.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>) -> Result<()> {
        if grads.len() != store.len() || grads.len() != self.m.len() {
            return shape_err(format!(
                "adam: {} gradient slots for {} parameters ({} moment slots)",
                grads.len(),
                store.len(),
                self.m.len()
            ));
        }
        for (idx, id) in store.ids().enumerate() {
            if grads.slot(idx).len() != store.get(id).numel() || self.m[idx].len() != store.get(id).numel() {
                return shape_err(format!("adam: gradient size mismatch for {}", store.name(id)));
            }
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let (b1, b2): (T, T) = (lit(self.beta1), lit(self.beta2));
        let one = T::one();
        let bc1: T = lit(1.0 - self.beta1.powf(t));
        let bc2: T = lit(1.0 - self.beta2.powf(t));
        let lr: T = lit(self.lr);
        let eps: T = lit(self.eps_adam);
        for (idx, id) in store.ids().enumerate() {
            let g = grads.slot(idx);
            let p = store.get_mut(id).data_mut();
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
