//! Parameterized layers built on the graph primitives.

use rand::Rng;

use crate::backend::{Graph, ParamId, ParamStore, Real, Var};
use crate::error::Result;

/// Affine map `x @ W (+ b)` applied to the last axis.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), &[d_in, d_out], d_in, rng);
        let bias = bias.then(|| store.add_uniform(format!("{name}.bias"), &[d_out], d_in, rng));
        Linear { weight, bias, d_in, d_out }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let bv = g.param(store, b);
                g.add_bias(y, bv)
            }
            None => Ok(y),
        }
    }

    pub fn param_count(&self) -> usize {
        self.d_in * self.d_out + if self.bias.is_some() { self.d_out } else { 0 }
    }
}

/// Learned affine of a layer norm.
#[derive(Clone, Copy, Debug)]
pub struct LayerNormAffine {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNormAffine {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, d: usize) -> Self {
        let gamma = store.add(format!("{name}.gamma"), crate::backend::Tensor::full(&[d], T::one()));
        let beta = store.add(format!("{name}.beta"), crate::backend::Tensor::zeros(&[d]));
        LayerNormAffine { gamma, beta }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let gm = g.param(store, self.gamma);
        let bt = g.param(store, self.beta);
        g.layer_norm(x, Some(gm), Some(bt))
    }
}

/// A standard LSTM cell. Gate order in the fused projection: input, forget,
/// cell candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub input: Linear,
    pub hidden: Linear,
    pub d_hidden: usize,
}

impl LstmCell {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        rng: &mut R,
    ) -> Self {
        let input = Linear::new(store, &format!("{name}.input"), d_in, 4 * d_hidden, true, rng);
        let hidden = Linear::new(store, &format!("{name}.hidden"), d_hidden, 4 * d_hidden, false, rng);
        LstmCell { input, hidden, d_hidden }
    }

    /// One step on a batch of rows: `x [R, d_in]`, `h, c [R, d_hidden]`.
    pub fn step<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let xi = self.input.forward(g, store, x)?;
        let hh = self.hidden.forward(g, store, h)?;
        let gates = g.add(xi, hh)?;
        let parts = g.split_last(gates, 4)?;
        let i = g.sigmoid(parts[0]);
        let f = g.sigmoid(parts[1]);
        let cand = g.tanh(parts[2]);
        let o = g.sigmoid(parts[3]);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_next = g.add(keep, write)?;
        let tc = g.tanh(c_next);
        let h_next = g.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    pub fn param_count(&self) -> usize {
        self.input.param_count() + self.hidden.param_count()
    }
}
