//! Straight-line reference implementations shared by the integration tests.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use aid_tpr::aid::AidConfig;
use aid_tpr::backend::ParamStore;

pub type M = Vec<Vec<f64>>;

pub fn mm(a: &M, b: &M) -> M {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

pub fn affine(x: &M, w: &M, b: Option<&[f64]>) -> M {
    let mut y = mm(x, w);
    if let Some(b) = b {
        for row in &mut y {
            for (v, bb) in row.iter_mut().zip(b) {
                *v += bb;
            }
        }
    }
    y
}

pub fn elu1(x: f64) -> f64 {
    if x >= 0.0 {
        x + 1.0
    } else {
        x.exp()
    }
}

pub fn mat(store: &ParamStore<f64>, name: &str) -> M {
    let t = store.get(store.find(name).unwrap());
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

pub fn vec_of(store: &ParamStore<f64>, name: &str) -> Vec<f64> {
    store.get(store.find(name).unwrap()).data().to_vec()
}

pub fn aid_oracle(store: &ParamStore<f64>, prefix: &str, cfg: &AidConfig, inputs: &M, init: &M) -> M {
    let d = cfg.d_com as f64;
    let key: M = mm(inputs, &mat(store, &format!("{prefix}.k.weight"))).into_iter().map(|r| r.into_iter().map(elu1).collect()).collect();
    let value = mm(inputs, &mat(store, &format!("{prefix}.v.weight")));
    let mut comps = init.clone();
    for _ in 0..cfg.n_iter {
        let q = mm(&comps, &mat(store, &format!("{prefix}.q.weight")));
        let query: M = q
            .iter()
            .zip(init)
            .map(|(qr, ir)| qr.iter().zip(ir).map(|(a, b)| elu1((a + b) / d.sqrt())).collect())
            .collect();
        // attn[i][j]: softmax over j of key_i . query_j
        let attn: M = key
            .iter()
            .map(|k| {
                let logits: Vec<f64> = query.iter().map(|qq| k.iter().zip(qq).map(|(a, b)| a * b).sum()).collect();
                let m = logits.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let n_com = comps.len();
        let mut updates = vec![vec![0.0; cfg.d_com]; n_com];
        for j in 0..n_com {
            let col: Vec<f64> = attn.iter().map(|r| r[j] + cfg.eps_attn).collect();
            let s: f64 = col.iter().sum();
            for (i, w) in col.iter().enumerate() {
                for c in 0..cfg.d_com {
                    updates[j][c] += w / s * value[i][c];
                }
            }
        }
        let (gamma, beta) = (vec_of(store, &format!("{prefix}.ln.gamma")), vec_of(store, &format!("{prefix}.ln.beta")));
        let normed: M = updates
            .iter()
            .map(|r| {
                let mean = r.iter().sum::<f64>() / d;
                let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
                r.iter().enumerate().map(|(c, x)| (x - mean) / (var + 1e-5).sqrt() * gamma[c] + beta[c]).collect()
            })
            .collect();
        let h = affine(&normed, &mat(store, &format!("{prefix}.mlp_update.0.weight")), Some(&vec_of(store, &format!("{prefix}.mlp_update.0.bias"))));
        let h: M = h.into_iter().map(|r| r.into_iter().map(|x| x.max(0.0)).collect()).collect();
        let delta = affine(&h, &mat(store, &format!("{prefix}.mlp_update.1.weight")), Some(&vec_of(store, &format!("{prefix}.mlp_update.1.bias"))));
        for (cr, dr) in comps.iter_mut().zip(&delta) {
            for (c, dd) in cr.iter_mut().zip(dr) {
                *c += dd / d;
            }
        }
    }
    let cat: M = comps.iter().zip(init).map(|(a, b)| a.iter().chain(b).cloned().collect()).collect();
    affine(&cat, &mat(store, &format!("{prefix}.mlp_final.weight")), Some(&vec_of(store, &format!("{prefix}.mlp_final.bias"))))
}


pub fn vec_param(store: &ParamStore<f64>, name: &str) -> Vec<f64> {
    store.get(store.find(name).unwrap()).data().to_vec()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn layer_norm(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    x.iter().map(|v| (v - m) / (var + 1e-5).sqrt()).collect()
}

pub fn linear(store: &ParamStore<f64>, name: &str, x: &[f64]) -> Vec<f64> {
    let bias = store.find(&format!("{name}.bias")).map(|_| vec_param(store, &format!("{name}.bias")));
    affine(&vec![x.to_vec()], &mat(store, &format!("{name}.weight")), bias.as_deref()).remove(0)
}

/// One LSTM cell step with gates ordered input, forget, candidate, output.
pub fn lstm_cell(store: &ParamStore<f64>, name: &str, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let a = linear(store, &format!("{name}.input"), x);
    let b = linear(store, &format!("{name}.hidden"), h);
    let z: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for j in 0..n {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[n + j]);
        let g = z[2 * n + j].tanh();
        let o = sigmoid(z[3 * n + j]);
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

/// Dense third-order memory, `f[a][b][c]`.
pub struct DenseMemory {
    pub f: Vec<Vec<Vec<f64>>>,
}

impl DenseMemory {
    pub fn new(d: usize) -> Self {
        DenseMemory { f: vec![vec![vec![0.0; d]; d]; d] }
    }

    pub fn read(&self, u1: &[f64], u2: &[f64]) -> Vec<f64> {
        let d = u1.len();
        let mut out = vec![0.0; d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    out[c] += self.f[a][b][c] * u1[a] * u2[b];
                }
            }
        }
        out
    }

    pub fn write(&mut self, k1: &[f64], k2: &[f64], v: &[f64], beta: f64) {
        let old = self.read(k1, k2);
        let d = k1.len();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    self.f[a][b][c] += beta * (v[c] - old[c]) * k1[a] * k2[b];
                }
            }
        }
    }
}

/// Per-step logits of the full model on one episode, eval mode.
/// Each step is `(x id, optional y id, flags)`.
pub fn model_oracle(
    store: &ParamStore<f64>,
    cfg: &aid_tpr::model::ModelConfig,
    steps: &[(usize, Option<usize>, [f64; 2])],
    ablate_memory: bool,
) -> Vec<Vec<f64>> {
    let table = mat(store, "embed.table");
    let (ni, dl, ds, d) = (cfg.n_inputs, cfg.d_lstm, cfg.d_sub, cfg.d_com());
    let mut hs = vec![vec![0.0; dl]; ni];
    let mut cs = vec![vec![0.0; dl]; ni];
    let mut memory = DenseMemory::new(cfg.d_mem);
    let mut out = Vec::new();
    for &(x, y, flags) in steps {
        let mut input = table[x].clone();
        input.extend(y.map_or(vec![0.0; cfg.d_embed], |y| table[y].clone()));
        input.extend(flags);
        let xhat = linear(store, "partition", &input);
        for i in 0..ni {
            let (h, c) = lstm_cell(store, "lstm", &xhat[i * ds..(i + 1) * ds], &hs[i], &cs[i]);
            hs[i] = h;
            cs[i] = c;
        }
        let hcat = hs.concat();
        let rows = |flat: Vec<f64>| flat.chunks(d).map(|r| r.to_vec()).collect::<M>();
        let enc_init = rows(linear(store, "init_enc", &hcat));
        let enc = if cfg.use_aid { aid_oracle(store, "aid", &cfg.aid_enc, &hs, &enc_init) } else { enc_init };
        let beta = sigmoid(linear(store, "beta", &hcat)[0]);
        if !ablate_memory {
            memory.write(&enc[0], &enc[1], &enc[2], beta);
        }
        let dec_init = rows(linear(store, "init_dec", &hcat));
        let dec = if cfg.use_aid { aid_oracle(store, "aid", &cfg.aid_dec, &hs, &dec_init) } else { dec_init };
        let mut s = dec[0].clone();
        for e in &dec[1..] {
            s = layer_norm(&memory.read(&s, e));
        }
        let mut head = hcat.clone();
        head.extend(s);
        out.push(linear(store, "readout", &head));
    }
    out
}
