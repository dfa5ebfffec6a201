//! Finite-difference verification suites over every differentiable piece:
//! the tensor primitives, the memory, AID and the whole model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aid::{decompose, AidConfig, AidParams};
use crate::backend::{gradcheck, GradcheckOptions, GradcheckReport, Graph, ParamStore, Tensor, Var};
use crate::error::Result;
use crate::memory;
use crate::model::{Model, ModelConfig, RunOptions, StepTokens};

/// Relative tolerance for single primitives.
pub const PRIMITIVE_TOL: f64 = 1e-5;
/// Relative tolerance for a whole model step.
pub const END_TO_END_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub tol: f64,
    pub report: GradcheckReport,
}

impl CheckResult {
    pub fn pass(&self) -> bool {
        self.report.pass
    }
}

type Loss<'a> = dyn Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var> + 'a;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()).expect("valid shape")
}

/// Entries bounded away from zero, for functions with a kink there.
fn off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    rand_tensor(rng, shape).map(|v| if v >= 0.0 { v + 0.2 } else { v - 0.2 })
}

/// Contracts `y` with fixed random weights so every output coordinate has
/// its own sensitivity.
fn weighted_sum(g: &mut Graph<f64>, y: Var, seed: u64) -> Result<Var> {
    let w = rand_tensor(&mut ChaCha8Rng::seed_from_u64(seed), g.shape(y));
    let w = g.input(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn run(name: &str, store: &ParamStore<f64>, tol: f64, f: &Loss<'_>) -> Result<CheckResult> {
    // Small h: short layer-norm rows are steep enough that truncation error
    // at h = 1e-4 would exceed the tolerance.
    let opts = GradcheckOptions { h: 1e-6, ..GradcheckOptions::with_tol(tol) };
    Ok(CheckResult { name: name.to_string(), tol, report: gradcheck(store, f, &opts)? })
}

/// One check per tensor primitive at tolerance [`PRIMITIVE_TOL`].
pub fn primitive_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let a = s.add("a", rand_tensor(&mut rng, &[2, 3, 4]));
    let b = s.add("b", rand_tensor(&mut rng, &[2, 3, 4]));
    let kinked = s.add("kinked", off_kink(&mut rng, &[2, 3, 4]));
    let bias = s.add("bias", rand_tensor(&mut rng, &[4]));
    let gamma = s.add("gamma", rand_tensor(&mut rng, &[4]));
    let rows = s.add("rows", rand_tensor(&mut rng, &[6]));
    let w = s.add("w", rand_tensor(&mut rng, &[4, 5]));
    let wt = s.add("wt", rand_tensor(&mut rng, &[5, 4]));
    let at = s.add("at", rand_tensor(&mut rng, &[2, 4, 3]));
    let bb = s.add("bb", rand_tensor(&mut rng, &[2, 4, 5]));
    let table = s.add("table", rand_tensor(&mut rng, &[5, 3]));
    let pos = s.add("pos", rand_tensor(&mut rng, &[2, 3, 4]).map(f64::exp));

    type Unary = fn(&mut Graph<f64>, Var) -> Result<Var>;
    let unary: [(&str, Unary); 8] = [
        ("elu_plus_one", |g, x| Ok(g.elu_plus_one(x))),
        ("sigmoid", |g, x| Ok(g.sigmoid(x))),
        ("tanh", |g, x| Ok(g.tanh(x))),
        ("exp", |g, x| Ok(g.exp(x))),
        ("softmax", |g, x| g.softmax(x)),
        ("layer_norm", |g, x| g.layer_norm(x, None, None)),
        ("scale", |g, x| Ok(g.scale(x, -0.7))),
        ("add_scalar", |g, x| Ok(g.add_scalar(x, 0.3))),
    ];
    let mut out = Vec::new();
    for (i, (name, op)) in unary.into_iter().enumerate() {
        out.push(run(name, &s, PRIMITIVE_TOL, &move |g, st| {
            let x = g.param(st, a);
            let y = op(g, x)?;
            weighted_sum(g, y, seed + i as u64)
        })?);
    }

    type Case = Box<Loss<'static>>;
    let cases: Vec<(&str, Case)> = vec![
        ("relu", Box::new(move |g, st| {
            let x = g.param(st, kinked);
            let y = g.relu(x);
            weighted_sum(g, y, seed + 20)
        })),
        ("normalize_sum", Box::new(move |g, st| {
            let x = g.param(st, pos);
            let y = g.normalize_sum(x)?;
            weighted_sum(g, y, seed + 21)
        })),
        ("layer_norm_affine", Box::new(move |g, st| {
            let (x, gm, bt) = (g.param(st, a), g.param(st, gamma), g.param(st, bias));
            let y = g.layer_norm(x, Some(gm), Some(bt))?;
            weighted_sum(g, y, seed + 22)
        })),
        ("add", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, b));
            let z = g.add(x, y)?;
            weighted_sum(g, z, seed + 23)
        })),
        ("sub", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, b));
            let z = g.sub(x, y)?;
            weighted_sum(g, z, seed + 24)
        })),
        ("mul", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, b));
            let z = g.mul(x, y)?;
            weighted_sum(g, z, seed + 25)
        })),
        ("add_bias", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, bias));
            let z = g.add_bias(x, y)?;
            weighted_sum(g, z, seed + 26)
        })),
        ("mul_rows", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, rows));
            let z = g.mul_rows(x, y)?;
            weighted_sum(g, z, seed + 27)
        })),
        ("concat", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, b));
            let z = g.concat(&[x, y, x])?;
            weighted_sum(g, z, seed + 28)
        })),
        ("slice_split_select", Box::new(move |g, st| {
            let x = g.param(st, a);
            let s1 = g.slice_last(x, 1, 2)?;
            let parts = g.split_last(x, 2)?;
            let r = g.select_row(x, 2)?;
            let mut acc = weighted_sum(g, s1, seed + 29)?;
            for (k, v) in parts.into_iter().chain([r]).enumerate() {
                let t = weighted_sum(g, v, seed + 30 + k as u64)?;
                acc = g.add(acc, t)?;
            }
            Ok(acc)
        })),
        ("reshape_transpose", Box::new(move |g, st| {
            let x = g.param(st, a);
            let t = g.transpose(x)?;
            let r = g.reshape(t, &[8, 3])?;
            weighted_sum(g, r, seed + 33)
        })),
        ("outer", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, b));
            let z = g.outer(x, y)?;
            weighted_sum(g, z, seed + 34)
        })),
        ("matmul", Box::new(move |g, st| {
            let (x, y, z) = (g.param(st, a), g.param(st, bb), g.param(st, w));
            let p = g.matmul(x, y)?;
            let q = g.matmul(x, z)?;
            let l1 = weighted_sum(g, p, seed + 35)?;
            let l2 = weighted_sum(g, q, seed + 36)?;
            g.add(l1, l2)
        })),
        ("matmul_t", Box::new(move |g, st| {
            let (x, xt, y, yt) = (g.param(st, a), g.param(st, at), g.param(st, bb), g.param(st, wt));
            let p = g.matmul_t(xt, y, true, false)?;
            let q = g.matmul_t(x, yt, false, true)?;
            let l1 = weighted_sum(g, p, seed + 37)?;
            let l2 = weighted_sum(g, q, seed + 38)?;
            g.add(l1, l2)
        })),
        ("set_contract", Box::new(move |g, st| {
            let (x, y) = (g.param(st, a), g.param(st, bb));
            let z = g.set_contract(x, y)?;
            weighted_sum(g, z, seed + 39)
        })),
        ("embedding_dropout_cross_entropy", Box::new(move |g, st| {
            let t = g.param(st, table);
            let e = g.embedding(t, &[4, 0, 4, 2])?;
            // Fixed seed: the same mask on every evaluation.
            let d = g.dropout(e, 0.5, &mut ChaCha8Rng::seed_from_u64(seed + 40))?;
            g.cross_entropy(d, &[0, 2, 1, 1])
        })),
    ];
    for (name, f) in &cases {
        out.push(run(name, &s, PRIMITIVE_TOL, f.as_ref())?);
    }
    Ok(out)
}

/// Memory write/read, AID and the whole model on tiny dimensions.
pub fn model_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (bsz, d) = (2, 3);
    let mut s = ParamStore::new();
    let ids: Vec<_> = (0..8).map(|i| s.add(format!("x{i}"), rand_tensor(&mut rng, &[bsz, d]))).collect();
    let beta = s.add("beta", Tensor::from_f64(&[bsz], &[0.3, 0.9])?);
    out.push(run("memory_write_multihop_read", &s, PRIMITIVE_TOL, &move |g, st| {
        let v: Vec<Var> = ids.iter().map(|&id| g.param(st, id)).collect();
        let b = g.param(st, beta);
        let f = memory::empty(g, bsz, d);
        let f = memory::write(g, f, v[0], v[1], v[2], b)?;
        let f = memory::write(g, f, v[3], v[4], v[5], b)?;
        let r = memory::multihop_read(g, f, v[6], &[v[7], v[1]])?;
        weighted_sum(g, r, seed + 50)
    })?);

    let cfg = AidConfig {
        n_iter: 2,
        d_com: 6,
        d_mlp_update: (7, 6),
        d_mlp_final: 6,
        ..AidConfig::sar_default(3, 3, 5)
    };
    let mut s = ParamStore::new();
    let params = AidParams::new(&mut s, "aid", &cfg, &mut rng);
    let inputs = rand_tensor(&mut rng, &[2, 3, 5]);
    let init = rand_tensor(&mut rng, &[2, 3, 6]);
    out.push(run("aid_decompose", &s, PRIMITIVE_TOL, &|g, st| {
        let x = g.input(inputs.clone());
        let c = g.input(init.clone());
        let y = decompose(g, st, &params, &cfg, x, c, true, &mut ChaCha8Rng::seed_from_u64(seed + 51))?;
        weighted_sum(g, y, seed + 52)
    })?);

    for use_aid in [true, false] {
        let cfg = tiny_model(use_aid);
        let mut s = ParamStore::new();
        let model = Model::new(cfg, &mut s, &mut rng)?;
        let steps = vec![
            StepTokens { x: vec![0, 1], y: Some(vec![5, 4]), flags: [1.0, 0.0] },
            StepTokens { x: vec![2, 0], y: Some(vec![4, 6]), flags: [0.0, 0.0] },
            StepTokens { x: vec![2, 1], y: None, flags: [0.0, 1.0] },
            StepTokens { x: vec![0, 0], y: None, flags: [0.0, 0.0] },
        ];
        let name = if use_aid { "model_episode_aid" } else { "model_episode_baseline" };
        out.push(run(name, &s, END_TO_END_TOL, &|g, st| {
            let opts = RunOptions { train: true, ablate_memory: false };
            let o = model.forward(g, st, &steps, opts, &mut ChaCha8Rng::seed_from_u64(seed + 53))?;
            let l1 = g.cross_entropy(o[2].logits, &[1, 0])?;
            let l2 = g.cross_entropy(o[3].logits, &[0, 2])?;
            g.add(l1, l2)
        })?);
    }
    Ok(out)
}

/// The smallest model that exercises every code path.
pub fn tiny_model(use_aid: bool) -> ModelConfig {
    let mut cfg = ModelConfig::sar(8, 4);
    cfg.d_embed = 3;
    cfg.d_sub = 2;
    cfg.d_lstm = 3;
    cfg.d_mem = 4;
    cfg.use_aid = use_aid;
    cfg.set_n_inputs(2);
    cfg.update_aid(|a| {
        a.d_inputs = 3;
        a.d_com = 4;
        a.d_mlp_update = (5, 4);
        a.d_mlp_final = 4;
    });
    cfg
}

pub fn full_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut all = primitive_suite(seed)?;
    all.extend(model_suite(seed)?);
    Ok(all)
}
