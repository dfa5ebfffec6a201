//! Training and evaluation on associative-recall episodes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::rng::{stream, streams};
use crate::backend::{checkpoint, lit, AdamState, Graph, ParamStore, Real, Tensor, Var};
use crate::error::{shape_err, Error, Result};
use crate::model::{Model, ModelConfig, RunOptions};
use crate::sar::{batch_steps, generate_episode, word_sets_for, Episode, SarConfig, Split, WordSets};

pub const METRICS_HEADER: &str = "iter,loss,eval_acc";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iters: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub eval_every: usize,
    /// Size of the fixed held-out evaluation set.
    pub eval_episodes: usize,
    pub n_seeds: usize,
    /// Global-norm clipping threshold; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    /// 10K iterations at batch 32.
    pub fn desk() -> Self {
        TrainConfig {
            iters: 10_000,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            eps_adam: 1e-8,
            eval_every: 500,
            eval_episodes: 512,
            n_seeds: 5,
            grad_clip: None,
        }
    }

    /// 30K iterations at batch 64.
    pub fn full() -> Self {
        TrainConfig { iters: 30_000, batch_size: 64, eval_every: 1000, n_seeds: 10, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.iters, self.batch_size, self.eval_every, self.eval_episodes, self.n_seeds];
        if positive.contains(&0) || !(self.lr > 0.0) {
            return Err(Error::Config(format!("training sizes and learning rate must be positive: {self:?}")));
        }
        if self.iters < self.eval_every {
            return Err(Error::Config(format!("iters {} < eval_every {}", self.iters, self.eval_every)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// Everything that determines a run besides its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub sar: SarConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Experiment {
    pub fn desk(p: f64) -> Self {
        let sar = SarConfig::desk(p);
        let mut model = ModelConfig::sar(sar.n_words(), sar.n_classes());
        model.d_embed = sar.d_embed;
        Experiment { sar, model, train: TrainConfig::desk() }
    }

    pub fn full(p: f64) -> Self {
        let sar = SarConfig::full(p);
        let mut model = ModelConfig::sar(sar.n_words(), sar.n_classes());
        model.d_embed = sar.d_embed;
        Experiment { sar, model, train: TrainConfig::full() }
    }

    /// Re-derives vocabulary-dependent model fields after editing `sar`.
    pub fn sync(&mut self) {
        self.model.n_words = self.sar.n_words();
        self.model.n_classes = self.sar.n_classes();
        self.model.d_embed = self.sar.d_embed;
    }

    pub fn validate(&self) -> Result<()> {
        self.sar.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if (self.model.n_words, self.model.n_classes, self.model.d_embed)
            != (self.sar.n_words(), self.sar.n_classes(), self.sar.d_embed)
        {
            return Err(Error::Config("model vocabulary does not match the task".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub iter: usize,
    /// Mean training loss since the previous point.
    pub loss: f64,
    pub eval_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub points: Vec<EvalPoint>,
}

impl RunMetrics {
    pub fn final_acc(&self) -> Option<f64> {
        self.points.last().map(|p| p.eval_acc)
    }

    pub fn best_acc(&self) -> Option<f64> {
        self.points.iter().map(|p| p.eval_acc).reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{METRICS_HEADER}\n");
        for p in &self.points {
            s.push_str(&csv_row(p));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(Error::Format(format!("metrics must start with `{METRICS_HEADER}`")));
        }
        let bad = |l: &str| Error::Format(format!("bad metrics row `{l}`"));
        let points = lines
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 3 {
                    return Err(bad(l));
                }
                Ok(EvalPoint {
                    iter: f[0].parse().map_err(|_| bad(l))?,
                    loss: f[1].parse().map_err(|_| bad(l))?,
                    eval_acc: f[2].parse().map_err(|_| bad(l))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(RunMetrics { points })
    }
}

fn csv_row(p: &EvalPoint) -> String {
    format!("{},{},{}\n", p.iter, p.loss, p.eval_acc)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Mean cross-entropy over the trailing `targets.len()` steps of
/// `step_logits`; earlier (discovery) steps do not enter the loss.
pub fn inference_loss<T: Real>(g: &mut Graph<T>, step_logits: &[Var], targets: &[Vec<usize>]) -> Result<Var> {
    let n = targets.len();
    if n == 0 || n > step_logits.len() {
        return shape_err(format!("{n} inference targets for {} steps", step_logits.len()));
    }
    let first = step_logits.len() - n;
    let mut total: Option<Var> = None;
    for (logits, t) in step_logits[first..].iter().zip(targets) {
        let ce = g.cross_entropy(*logits, t)?;
        total = Some(match total {
            Some(acc) => g.add(acc, ce)?,
            None => ce,
        });
    }
    Ok(g.scale(total.expect("n > 0"), lit(1.0 / n as f64)))
}

/// Correct predictions and total count for logits against targets.
pub fn count_correct<T: Real>(logits: &[Tensor<T>], targets: &[Vec<usize>]) -> (usize, usize) {
    let mut correct = 0;
    let mut total = 0;
    for (l, t) in logits.iter().zip(targets) {
        for (r, &target) in t.iter().enumerate() {
            let row = l.row(r);
            let argmax = (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best });
            correct += usize::from(argmax == target);
            total += 1;
        }
    }
    (correct, total)
}

type ChunkOutputs<T> = (Vec<Tensor<T>>, Vec<Vec<usize>>);

/// Runs `episodes` in evaluation mode and returns the logits of each
/// inference step with its targets, one entry per batch chunk.
fn inference_outputs<T: Real>(
    model: &Model,
    store: &ParamStore<T>,
    ws: &WordSets,
    episodes: &[Episode],
    chunk: usize,
    opts: RunOptions,
) -> Result<Vec<ChunkOutputs<T>>> {
    let mut out = Vec::new();
    let mut rng = stream(0, streams::DROPOUT, u64::MAX);
    for batch in episodes.chunks(chunk.max(1)) {
        let (steps, targets) = batch_steps(batch, ws)?;
        let mut g = Graph::new();
        let vars = model.forward(&mut g, store, &steps, RunOptions { train: false, ..opts }, &mut rng)?;
        let n = targets.len();
        let logits = vars[vars.len() - n..].iter().map(|v| g.value(v.logits).clone()).collect();
        out.push((logits, targets));
    }
    Ok(out)
}

/// Fraction of inference positions whose argmax logit is the target class.
/// Dropout is off and parameters are never modified.
pub fn evaluate<T: Real>(
    model: &Model,
    store: &ParamStore<T>,
    ws: &WordSets,
    episodes: &[Episode],
    opts: RunOptions,
) -> Result<f64> {
    let (mut c, mut n) = (0, 0);
    for (logits, targets) in inference_outputs(model, store, ws, episodes, 128, opts)? {
        let (ci, ni) = count_correct(&logits, &targets);
        c += ci;
        n += ni;
    }
    if n == 0 {
        return Err(Error::Insufficient("no evaluation episodes".into()));
    }
    Ok(c as f64 / n as f64)
}

/// The fixed evaluation set of a run: episodes `0..n` of the eval split.
pub fn eval_set(ws: &WordSets, sar: &SarConfig, seed: u64, n: usize) -> Result<Vec<Episode>> {
    (0..n as u64).map(|i| generate_episode(ws, sar, Split::Eval, seed, i)).collect()
}

/// Training batch `iter` of a run.
pub fn train_batch(ws: &WordSets, sar: &SarConfig, seed: u64, iter: usize, batch: usize) -> Result<Vec<Episode>> {
    let start = (iter * batch) as u64;
    (start..start + batch as u64).map(|i| generate_episode(ws, sar, Split::Train, seed, i)).collect()
}

/// Builds a freshly initialized model for `exp` under `seed`.
pub fn init_model<T: Real>(exp: &Experiment, seed: u64) -> Result<(Model, ParamStore<T>)> {
    let mut store = ParamStore::new();
    let model = Model::new(exp.model.clone(), &mut store, &mut stream(seed, streams::INIT, 0))?;
    Ok((model, store))
}

/// Loss of one batch, with gradients when `backward` is set.
pub fn batch_loss<T: Real>(
    model: &Model,
    store: &ParamStore<T>,
    ws: &WordSets,
    episodes: &[Episode],
    train: bool,
    dropout_seed: (u64, u64),
) -> Result<(f64, Graph<T>)> {
    let (steps, targets) = batch_steps(episodes, ws)?;
    let mut g = Graph::new();
    let mut rng = stream(dropout_seed.0, streams::DROPOUT, dropout_seed.1);
    let vars = model.forward(&mut g, store, &steps, RunOptions { train, ablate_memory: false }, &mut rng)?;
    let logits: Vec<Var> = vars.iter().map(|v| v.logits).collect();
    let loss = inference_loss(&mut g, &logits, &targets)?;
    let value = g.value(loss).item().to_f64().unwrap_or(f64::NAN);
    if train {
        g.backward(loss)?;
    }
    Ok((value, g))
}

pub struct RunResult<T: Real> {
    pub metrics: RunMetrics,
    pub model: Model,
    pub store: ParamStore<T>,
}

/// Trains one seed. With `out`, appends `metrics.csv` rows as they are
/// produced and writes `checkpoint` (final) and `checkpoint-best`.
/// `on_point` sees every evaluation point.
pub fn train_run<T: Real>(
    exp: &Experiment,
    seed: u64,
    out: Option<&Path>,
    mut on_point: impl FnMut(&EvalPoint),
) -> Result<RunResult<T>> {
    exp.validate()?;
    let ws = word_sets_for(&exp.sar)?;
    let tc = &exp.train;
    let (model, mut store) = init_model::<T>(exp, seed)?;
    let mut adam = AdamState::new(&store, tc.lr, tc.beta1, tc.beta2, tc.eps_adam);
    let eval_eps = eval_set(&ws, &exp.sar, seed, tc.eval_episodes)?;

    let mut csv = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut f = BufWriter::new(File::create(dir.join("metrics.csv"))?);
            writeln!(f, "{METRICS_HEADER}")?;
            f.flush()?;
            Some(f)
        }
        None => None,
    };

    let mut metrics = RunMetrics::default();
    let mut best = f64::NEG_INFINITY;
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    for iter in 0..tc.iters {
        let batch = train_batch(&ws, &exp.sar, seed, iter, tc.batch_size)?;
        let (loss, g) = match batch_loss(&model, &store, &ws, &batch, true, (seed, iter as u64)) {
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { iter, loss: f64::NAN }),
            r => r?,
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { iter, loss });
        }
        let mut grads = g.param_grads(&store);
        if !grads.all_finite() {
            return Err(Error::Diverged { iter, loss });
        }
        if let Some(c) = tc.grad_clip {
            grads.clip_global_norm(lit(c));
        }
        adam.step(&mut store, &grads)?;
        loss_sum += loss;
        loss_n += 1;

        let done = iter + 1;
        if done % tc.eval_every == 0 || done == tc.iters {
            let eval_acc = evaluate(&model, &store, &ws, &eval_eps, RunOptions::default())?;
            let point = EvalPoint { iter: done, loss: loss_sum / loss_n as f64, eval_acc };
            (loss_sum, loss_n) = (0.0, 0);
            if let Some(f) = csv.as_mut() {
                f.write_all(csv_row(&point).as_bytes())?;
                f.flush()?;
            }
            if let (Some(dir), true) = (out, eval_acc > best) {
                checkpoint::save(&store, &dir.join("checkpoint-best"))?;
            }
            best = best.max(eval_acc);
            on_point(&point);
            metrics.points.push(point);
        }
    }
    if let Some(dir) = out {
        checkpoint::save(&store, &dir.join("checkpoint"))?;
    }
    Ok(RunResult { metrics, model, store })
}
