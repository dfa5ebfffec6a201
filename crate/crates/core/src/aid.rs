//! Attention-based iterative decomposition.
//!
//! Given `N_inputs` input features and `N_com` context-dependent initial
//! components, the module refines the components with competitive attention:
//! each input distributes its attention over the components (softmax over
//! the component axis), each component then takes an attention-weighted mean
//! of the input values, and the result is added back through a layer-normed
//! two-layer MLP. Components stay tied to the slot they were initialized in,
//! which is what lets callers route slot `i` to a fixed symbol such as
//! `role1` or `filler`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{lit, Graph, ParamStore, Real, Var};
use crate::error::{shape_err, Error, Result};
use crate::nn::{LayerNormAffine, Linear};

/// Activation applied to key and query before the dot product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnActivation {
    EluPlusOne,
    None,
    ReluVariant,
}

impl std::str::FromStr for AttnActivation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elu" | "elu_plus_one" => Ok(AttnActivation::EluPlusOne),
            "none" => Ok(AttnActivation::None),
            "relu" | "relu_variant" => Ok(AttnActivation::ReluVariant),
            other => Err(Error::Config(format!("unknown attention activation {other:?}"))),
        }
    }
}

impl std::fmt::Display for AttnActivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttnActivation::EluPlusOne => "elu",
            AttnActivation::None => "none",
            AttnActivation::ReluVariant => "relu",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AidConfig {
    pub n_com: usize,
    pub n_iter: usize,
    pub n_inputs: usize,
    pub d_inputs: usize,
    pub d_com: usize,
    pub d_mlp_update: (usize, usize),
    pub d_mlp_final: usize,
    pub p_dropout: f64,
    pub eps_attn: f64,
    pub use_query_residual: bool,
    pub use_final_concat: bool,
    pub attn_activation: AttnActivation,
}

impl AidConfig {
    /// Settings used with the fast-weight memory model on associative recall.
    pub fn sar_default(n_com: usize, n_inputs: usize, d_inputs: usize) -> Self {
        AidConfig {
            n_com,
            n_iter: 2,
            n_inputs,
            d_inputs,
            d_com: 32,
            d_mlp_update: (64, 32),
            d_mlp_final: 32,
            p_dropout: 0.5,
            eps_attn: 1e-8,
            use_query_residual: true,
            use_final_concat: true,
            attn_activation: AttnActivation::EluPlusOne,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.n_com, self.n_inputs, self.d_inputs, self.d_com, self.d_mlp_update.0, self.d_mlp_update.1, self.d_mlp_final];
        if dims.contains(&0) {
            return Err(Error::Config(format!("AID dimensions must be positive: {self:?}")));
        }
        if self.d_mlp_update.1 != self.d_com {
            return Err(Error::Config("MLP_update must map back to d_com".into()));
        }
        if self.d_mlp_final != self.d_com {
            return Err(Error::Config("MLP_final must produce d_com-wide components".into()));
        }
        if !(0.0..1.0).contains(&self.p_dropout) {
            return Err(Error::Config(format!("p_dropout {} outside [0, 1)", self.p_dropout)));
        }
        if !(self.eps_attn > 0.0) {
            return Err(Error::Config("eps_attn must be positive".into()));
        }
        Ok(())
    }
}

/// Learnable weights of one AID module. Independent of `n_com` and
/// `n_inputs`, so one set can serve encoder and decoder.
#[derive(Clone, Copy, Debug)]
pub struct AidParams {
    pub k: Linear,
    pub q: Linear,
    pub v: Linear,
    pub mlp_update_hidden: Linear,
    pub mlp_update_out: Linear,
    pub ln: LayerNormAffine,
    pub mlp_final: Linear,
}

impl AidParams {
    pub fn new<T: Real, R: Rng + ?Sized>(store: &mut ParamStore<T>, prefix: &str, cfg: &AidConfig, rng: &mut R) -> Self {
        let d = cfg.d_com;
        let final_in = if cfg.use_final_concat { 2 * d } else { d };
        AidParams {
            k: Linear::new(store, &format!("{prefix}.k"), cfg.d_inputs, d, false, rng),
            q: Linear::new(store, &format!("{prefix}.q"), d, d, false, rng),
            v: Linear::new(store, &format!("{prefix}.v"), cfg.d_inputs, d, false, rng),
            mlp_update_hidden: Linear::new(store, &format!("{prefix}.mlp_update.0"), d, cfg.d_mlp_update.0, true, rng),
            mlp_update_out: Linear::new(store, &format!("{prefix}.mlp_update.1"), cfg.d_mlp_update.0, cfg.d_mlp_update.1, true, rng),
            ln: LayerNormAffine::new(store, &format!("{prefix}.ln"), d),
            mlp_final: Linear::new(store, &format!("{prefix}.mlp_final"), final_in, cfg.d_mlp_final, true, rng),
        }
    }

    pub fn param_count(&self, d_com: usize) -> usize {
        [self.k, self.q, self.v, self.mlp_update_hidden, self.mlp_update_out, self.mlp_final]
            .iter()
            .map(Linear::param_count)
            .sum::<usize>()
            + 2 * d_com
    }
}

fn activate<T: Real>(g: &mut Graph<T>, x: Var, act: AttnActivation) -> Var {
    match act {
        AttnActivation::EluPlusOne => g.elu_plus_one(x),
        AttnActivation::None => x,
        AttnActivation::ReluVariant => g.relu(x),
    }
}

/// `softmax(key @ query^T)` over the component axis: `[.., n_inputs, d]` and
/// `[.., n_com, d]` give `[.., n_inputs, n_com]` whose rows sum to one.
pub fn attention_matrix<T: Real>(g: &mut Graph<T>, key: Var, query: Var) -> Result<Var> {
    let (ks, qs) = (g.shape(key).to_vec(), g.shape(query).to_vec());
    if ks.len() != qs.len() || ks.last() != qs.last() || ks[..ks.len() - 2] != qs[..qs.len() - 2] {
        return shape_err(format!("attention key {ks:?} vs query {qs:?}"));
    }
    let logits = g.matmul_t(key, query, false, true)?;
    g.softmax(logits)
}

/// Per-component weighted mean of the value rows, with weights
/// `(attn + eps)` normalized over the input axis. Returns `[.., n_com, d]`.
pub fn weighted_mean<T: Real>(g: &mut Graph<T>, attn: Var, value: Var, eps_attn: f64) -> Result<Var> {
    let (a, v) = (g.shape(attn).to_vec(), g.shape(value).to_vec());
    if a.len() != v.len() || a[a.len() - 2] != v[v.len() - 2] {
        return shape_err(format!("weighted mean attn {a:?} vs value {v:?}"));
    }
    let per_component = g.transpose(attn)?;
    let shifted = g.add_scalar(per_component, lit(eps_attn));
    let weights = g.normalize_sum(shifted)?;
    // order-independent reduction keeps the module exactly symmetric in its inputs
    g.set_contract(weights, value)
}

fn check_shapes(inputs: &[usize], initial: &[usize], cfg: &AidConfig) -> Result<()> {
    let ok = inputs.len() == initial.len()
        && (inputs.len() == 2 || (inputs.len() == 3 && inputs[0] == initial[0]))
        && inputs[inputs.len() - 2..] == [cfg.n_inputs, cfg.d_inputs]
        && initial[initial.len() - 2..] == [cfg.n_com, cfg.d_com];
    if ok {
        Ok(())
    } else {
        shape_err(format!(
            "AID expects inputs [.., {}, {}] and initial components [.., {}, {}], got {inputs:?} and {initial:?}",
            cfg.n_inputs, cfg.d_inputs, cfg.n_com, cfg.d_com
        ))
    }
}

/// Runs the full decomposition and returns the refined components with the
/// same shape as `initial_components`.
///
/// `inputs` is `[n_inputs, d_inputs]` or batched `[B, n_inputs, d_inputs]`;
/// `initial_components` is `[n_com, d_com]` or `[B, n_com, d_com]`. Dropout
/// touches only the initial-component branch of the final projection and
/// only when `train_mode` is set.
#[allow(clippy::too_many_arguments)]
pub fn decompose<T: Real, R: Rng + ?Sized>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    params: &AidParams,
    cfg: &AidConfig,
    inputs: Var,
    initial_components: Var,
    train_mode: bool,
    rng: &mut R,
) -> Result<Var> {
    check_shapes(g.shape(inputs), g.shape(initial_components), cfg)?;
    let d = cfg.d_com;

    let key = params.k.forward(g, store, inputs)?;
    let key = activate(g, key, cfg.attn_activation);
    let value = params.v.forward(g, store, inputs)?;

    let query_scale: T = lit(1.0 / (d as f64).sqrt());
    let update_scale: T = lit(1.0 / d as f64);
    let mut components = initial_components;
    for _ in 0..cfg.n_iter {
        let mut query = params.q.forward(g, store, components)?;
        if cfg.use_query_residual {
            query = g.add(query, initial_components)?;
        }
        let query = g.scale(query, query_scale);
        let query = activate(g, query, cfg.attn_activation);
        let attn = attention_matrix(g, key, query)?;
        let updates = weighted_mean(g, attn, value, cfg.eps_attn)?;
        let normed = params.ln.forward(g, store, updates)?;
        let hidden = params.mlp_update_hidden.forward(g, store, normed)?;
        let hidden = g.relu(hidden);
        let delta = params.mlp_update_out.forward(g, store, hidden)?;
        let delta = g.scale(delta, update_scale);
        components = g.add(components, delta)?;
    }

    let final_in = if cfg.use_final_concat {
        let skip = if train_mode { g.dropout(initial_components, cfg.p_dropout, rng)? } else { initial_components };
        g.concat(&[components, skip])?
    } else {
        components
    };
    params.mlp_final.forward(g, store, final_in)
}

/// Components bound to named slots by position.
#[derive(Clone, Debug)]
pub struct RoutedSlots {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl RoutedSlots {
    pub fn get(&self, name: &str) -> Option<Var> {
        self.names.iter().position(|n| n == name).map(|i| self.vars[i])
    }

    pub fn at(&self, i: usize) -> Var {
        self.vars[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.names.iter().map(String::as_str).zip(self.vars.iter().copied())
    }
}

/// Slot `i` of `components` (`[.., n_com, d]`) is bound to `slot_names[i]`.
pub fn route_slots<T: Real, S: AsRef<str>>(g: &mut Graph<T>, components: Var, slot_names: &[S]) -> Result<RoutedSlots> {
    let s = g.shape(components).to_vec();
    if s.len() < 2 || s[s.len() - 2] != slot_names.len() {
        return shape_err(format!("{} slot names for components {s:?}", slot_names.len()));
    }
    let vars = (0..slot_names.len()).map(|i| g.select_row(components, i)).collect::<Result<Vec<_>>>()?;
    Ok(RoutedSlots { names: slot_names.iter().map(|n| n.as_ref().to_string()).collect(), vars })
}
