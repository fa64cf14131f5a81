//! Adam with bias correction.

use super::{Matrix, ParamStore, Result, TensorError};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        Self::with_betas(store, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(store: &ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Matrix> = store
            .ids()
            .map(|id| {
                let (r, c) = store.value(id).shape();
                Matrix::zeros(r, c)
            })
            .collect();
        Self { lr, beta1, beta2, eps, step: 0, first: zeros.clone(), second: zeros }
    }

    /// Applies one update from the stored gradients, then clears them.
    /// Parameters without a gradient are treated as having a zero gradient;
    /// a store with no gradients at all is an error.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.ids().all(|id| store.grad(id).is_none()) {
            let name = store.ids().next().map(|id| store.name(id).to_string()).unwrap_or_default();
            return Err(TensorError::MissingGrad(name));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let i = id.index();
            let grad = store.grad(id).cloned();
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            let value = store.value_mut(id);
            for k in 0..value.data().len() {
                let g = grad.as_ref().map_or(0.0, |g| g.data()[k]);
                let mk = self.beta1 * m.data()[k] + (1.0 - self.beta1) * g;
                let vk = self.beta2 * v.data()[k] + (1.0 - self.beta2) * g * g;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let update = self.lr * (mk / c1) / ((vk / c2).sqrt() + self.eps);
                value.data_mut()[k] -= update;
            }
        }
        store.zero_grads();
        Ok(())
    }
}
