//! Word-level fast-weight memory model with AID component generation.
//!
//! Each step embeds the input, transforms and partitions it into
//! `n_inputs` sub-vectors, runs one shared LSTM cell per sub-vector, and
//! derives encoder and decoder initial components from the concatenated
//! hidden state. AID refines them using the per-module hidden states as its
//! input features. The encoder components `(role1, role2, filler)` and a
//! sigmoid write strength update the memory; the decoder components
//! `(n0, e_1..e_n_read)` read it back, and the readout maps
//! `hidden ++ read` to output logits.
//!
//! With `use_aid = false` the initial components are used directly, which is
//! the plain feed-forward decomposition of the original model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aid::{decompose, route_slots, AidConfig, AidParams};
use crate::backend::{lit, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::error::{shape_err, Error, Result};
use crate::memory::FactoredMemory;
use crate::nn::{Linear, LstmCell};

pub const ENCODER_SLOTS: [&str; 3] = ["role1", "role2", "filler"];

/// Slot names of the decoder: `n0` followed by one `e_i` per read hop.
pub fn decoder_slots(n_read: usize) -> Vec<String> {
    std::iter::once("n0".to_string()).chain((1..=n_read).map(|i| format!("e{i}"))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Rows of the word embedding table.
    pub n_words: usize,
    /// Output classes.
    pub n_classes: usize,
    pub d_embed: usize,
    pub n_inputs: usize,
    pub d_sub: usize,
    /// Hidden width of each LSTM module.
    pub d_lstm: usize,
    pub n_read: usize,
    pub d_mem: usize,
    pub aid_enc: AidConfig,
    pub aid_dec: AidConfig,
    pub use_aid: bool,
}

impl ModelConfig {
    /// Associative-recall defaults: 3 partitions of 32, 85 hidden units per
    /// module (255 in total), one read hop, 32-wide memory and components.
    pub fn sar(n_words: usize, n_classes: usize) -> Self {
        let (n_inputs, d_lstm, n_read) = (3, 85, 1);
        ModelConfig {
            n_words,
            n_classes,
            d_embed: 50,
            n_inputs,
            d_sub: 32,
            d_lstm,
            n_read,
            d_mem: 32,
            aid_enc: AidConfig::sar_default(3, n_inputs, d_lstm),
            aid_dec: AidConfig::sar_default(1 + n_read, n_inputs, d_lstm),
            use_aid: true,
        }
    }

    /// Width of one step's input vector: `x ++ y ++ two flags`.
    pub fn d_step(&self) -> usize {
        2 * self.d_embed + 2
    }

    pub fn d_com(&self) -> usize {
        self.aid_enc.d_com
    }

    /// Applies one change to both AID configurations.
    pub fn update_aid(&mut self, f: impl Fn(&mut AidConfig)) {
        f(&mut self.aid_enc);
        f(&mut self.aid_dec);
    }

    /// Sets the partition count, keeping AID input shapes consistent.
    pub fn set_n_inputs(&mut self, n: usize) {
        self.n_inputs = n;
        self.update_aid(|a| a.n_inputs = n);
    }

    pub fn set_n_read(&mut self, n: usize) {
        self.n_read = n;
        self.aid_dec.n_com = 1 + n;
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.n_words, self.n_classes, self.d_embed, self.n_inputs, self.d_sub, self.d_lstm, self.n_read, self.d_mem];
        if dims.contains(&0) {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        self.aid_enc.validate()?;
        self.aid_dec.validate()?;
        if self.aid_enc.n_com != 3 {
            return Err(Error::Config("encoder needs exactly 3 components (role1, role2, filler)".into()));
        }
        if self.aid_dec.n_com != 1 + self.n_read {
            return Err(Error::Config(format!("decoder needs 1 + n_read = {} components", 1 + self.n_read)));
        }
        if self.d_com() != self.d_mem {
            return Err(Error::Config(format!("d_com {} must equal d_mem {}", self.d_com(), self.d_mem)));
        }
        for a in [&self.aid_enc, &self.aid_dec] {
            if a.n_inputs != self.n_inputs || a.d_inputs != self.d_lstm {
                return Err(Error::Config(format!(
                    "AID inputs must be the {} module hidden states of width {}",
                    self.n_inputs, self.d_lstm
                )));
            }
        }
        let shared = |a: &AidConfig| (a.d_com, a.d_mlp_update, a.d_mlp_final, a.use_final_concat);
        if shared(&self.aid_enc) != shared(&self.aid_dec) {
            return Err(Error::Config("encoder and decoder AID share weights and must agree on their shapes".into()));
        }
        Ok(())
    }
}

/// Token ids of one time step across a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTokens {
    pub x: Vec<usize>,
    /// `None` during inference, where the y half of the input is zero.
    pub y: Option<Vec<usize>>,
    pub flags: [f64; 2],
}

/// Graph nodes produced by one step.
#[derive(Clone, Debug)]
pub struct StepVars {
    pub logits: Var,
    pub role1: Var,
    pub role2: Var,
    pub filler: Var,
    pub beta: Var,
    pub n0: Var,
    pub hops: Vec<Var>,
}

/// Recurrent state for a batch: per-module `(h, c)` rows and the memory.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub h: Var,
    pub c: Var,
    pub memory: FactoredMemory,
}

/// Runtime switches that do not change parameters.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub train: bool,
    /// Keep the memory at zero (no writes).
    pub ablate_memory: bool,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub embed: ParamId,
    pub partition: Linear,
    pub lstm: LstmCell,
    pub init_enc: Linear,
    pub init_dec: Linear,
    pub aid: Option<AidParams>,
    pub beta_head: Linear,
    pub readout: Linear,
}

impl Model {
    pub fn new<T: Real, R: Rng + ?Sized>(cfg: ModelConfig, store: &mut ParamStore<T>, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let embed = store.add_uniform("embed.table", &[cfg.n_words, cfg.d_embed], cfg.d_embed, rng);
        let partition = Linear::new(store, "partition", cfg.d_step(), cfg.n_inputs * cfg.d_sub, true, rng);
        let lstm = LstmCell::new(store, "lstm", cfg.d_sub, cfg.d_lstm, rng);
        let hcat = cfg.n_inputs * cfg.d_lstm;
        let d = cfg.d_com();
        let init_enc = Linear::new(store, "init_enc", hcat, cfg.aid_enc.n_com * d, true, rng);
        let init_dec = Linear::new(store, "init_dec", hcat, cfg.aid_dec.n_com * d, true, rng);
        let aid = cfg.use_aid.then(|| AidParams::new(store, "aid", &cfg.aid_enc, rng));
        let beta_head = Linear::new(store, "beta", hcat, 1, true, rng);
        let readout = Linear::new(store, "readout", hcat + cfg.d_mem, cfg.n_classes, true, rng);
        Ok(Model { cfg, embed, partition, lstm, init_enc, init_dec, aid, beta_head, readout })
    }

    /// Rebinds the model to a configuration that differs only in settings
    /// that do not shape parameters, such as `n_iter`.
    pub fn with_config(&self, cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let same = |a: &AidConfig, b: &AidConfig| {
            (a.n_com, a.n_inputs, a.d_inputs, a.d_com, a.d_mlp_update, a.use_final_concat)
                == (b.n_com, b.n_inputs, b.d_inputs, b.d_com, b.d_mlp_update, b.use_final_concat)
        };
        let c = &self.cfg;
        if (cfg.n_words, cfg.n_classes, cfg.d_embed, cfg.n_inputs, cfg.d_sub, cfg.d_lstm, cfg.n_read, cfg.d_mem, cfg.use_aid)
            != (c.n_words, c.n_classes, c.d_embed, c.n_inputs, c.d_sub, c.d_lstm, c.n_read, c.d_mem, c.use_aid)
            || !same(&cfg.aid_enc, &c.aid_enc)
            || !same(&cfg.aid_dec, &c.aid_dec)
        {
            return Err(Error::Config("configuration change would alter parameter shapes".into()));
        }
        Ok(Model { cfg, ..self.clone() })
    }

    /// Number of AID parameters, zero for the baseline.
    pub fn aid_param_count(&self) -> usize {
        self.aid.map_or(0, |a| a.param_count(self.cfg.d_com()))
    }

    pub fn initial_state<T: Real>(&self, g: &mut Graph<T>, batch: usize) -> ModelState {
        let rows = batch * self.cfg.n_inputs;
        let h = g.input(Tensor::zeros(&[rows, self.cfg.d_lstm]));
        let c = g.input(Tensor::zeros(&[rows, self.cfg.d_lstm]));
        ModelState { h, c, memory: FactoredMemory::new(batch, self.cfg.d_mem) }
    }

    /// `[B, 2 d_embed + 2]` step input: embeddings of x and y (zeros when
    /// `y` is absent) followed by the two flags.
    pub fn embed_step<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, tokens: &StepTokens) -> Result<Var> {
        let b = tokens.x.len();
        if let Some(y) = &tokens.y {
            if y.len() != b {
                return shape_err(format!("{} x tokens but {} y tokens", b, y.len()));
            }
        }
        let table = g.param(store, self.embed);
        let ex = g.embedding(table, &tokens.x)?;
        let ey = match &tokens.y {
            Some(y) => g.embedding(table, y)?,
            None => g.input(Tensor::zeros(&[b, self.cfg.d_embed])),
        };
        let flags: Vec<T> = (0..b).flat_map(|_| tokens.flags.map(lit::<T>)).collect();
        let fl = g.input(Tensor::from_vec(&[b, 2], flags)?);
        g.concat(&[ex, ey, fl])
    }

    /// Affine transform of the step input, split into `n_inputs` rows of
    /// width `d_sub`: `[B, d_step]` -> `[B * n_inputs, d_sub]`.
    pub fn partition_transform<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let b = g.shape(x)[0];
        let xhat = self.partition.forward(g, store, x)?;
        g.reshape(xhat, &[b * self.cfg.n_inputs, self.cfg.d_sub])
    }

    /// One shared LSTM cell over every `(batch, module)` row.
    pub fn modular_lstm_step<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        chunks: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        self.lstm.step(g, store, chunks, h, c)
    }

    /// Initial components from the concatenated hidden state, `[B, n_com, d_com]`.
    pub fn make_initial_components<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        hcat: Var,
        decoder: bool,
    ) -> Result<Var> {
        let (affine, n_com) = if decoder { (self.init_dec, self.cfg.aid_dec.n_com) } else { (self.init_enc, self.cfg.aid_enc.n_com) };
        let b = g.shape(hcat)[0];
        let flat = affine.forward(g, store, hcat)?;
        g.reshape(flat, &[b, n_com, self.cfg.d_com()])
    }

    #[allow(clippy::too_many_arguments)]
    fn components<T: Real, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        hid: Var,
        init: Var,
        decoder: bool,
        opts: RunOptions,
        rng: &mut R,
    ) -> Result<Var> {
        match &self.aid {
            Some(p) => {
                let cfg = if decoder { &self.cfg.aid_dec } else { &self.cfg.aid_enc };
                decompose(g, store, p, cfg, hid, init, opts.train, rng)
            }
            None => Ok(init),
        }
    }

    /// One time step for a batch.
    #[allow(clippy::too_many_arguments)]
    pub fn step<T: Real, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        state: ModelState,
        opts: RunOptions,
        rng: &mut R,
    ) -> Result<(StepVars, ModelState)> {
        let cfg = &self.cfg;
        let b = g.shape(x)[0];
        let chunks = self.partition_transform(g, store, x)?;
        let (h, c) = self.modular_lstm_step(g, store, chunks, state.h, state.c)?;
        let hid = g.reshape(h, &[b, cfg.n_inputs, cfg.d_lstm])?;
        let hcat = g.reshape(h, &[b, cfg.n_inputs * cfg.d_lstm])?;

        let enc_init = self.make_initial_components(g, store, hcat, false)?;
        let enc = self.components(g, store, hid, enc_init, false, opts, rng)?;
        let enc = route_slots(g, enc, &ENCODER_SLOTS)?;
        let (role1, role2, filler) = (enc.at(0), enc.at(1), enc.at(2));
        let beta = self.beta_head.forward(g, store, hcat)?;
        let beta = g.sigmoid(beta);
        let mut memory = state.memory;
        if !opts.ablate_memory {
            memory.write(g, role1, role2, filler, beta)?;
        }

        let dec_init = self.make_initial_components(g, store, hcat, true)?;
        let dec = self.components(g, store, hid, dec_init, true, opts, rng)?;
        let dec = route_slots(g, dec, &decoder_slots(cfg.n_read))?;
        let n0 = dec.at(0);
        let hops: Vec<Var> = (1..dec.len()).map(|i| dec.at(i)).collect();
        let read = memory.multihop_read(g, n0, &hops)?;

        let head_in = g.concat(&[hcat, read])?;
        let logits = self.readout.forward(g, store, head_in)?;
        Ok((StepVars { logits, role1, role2, filler, beta, n0, hops }, ModelState { h, c, memory }))
    }

    /// Runs a whole batch of episodes from a fresh state.
    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        steps: &[StepTokens],
        opts: RunOptions,
        rng: &mut R,
    ) -> Result<Vec<StepVars>> {
        let b = steps.first().map_or(0, |s| s.x.len());
        if b == 0 || steps.iter().any(|s| s.x.len() != b) {
            return shape_err("episode batch must be non-empty with a fixed batch size");
        }
        let mut state = self.initial_state(g, b);
        let mut out = Vec::with_capacity(steps.len());
        for tokens in steps {
            let x = self.embed_step(g, store, tokens)?;
            let (vars, next) = self.step(g, store, x, state, opts, rng)?;
            out.push(vars);
            state = next;
        }
        Ok(out)
    }
}
