//! Run directories and the operations behind the command-line tool.
//!
//! Each seed of a run lives in `<out>/<run_name>/<seed>/` and holds
//! `manifest` (JSON, written before the first training step),
//! `metrics.csv`, `checkpoint`, `checkpoint-best` and a `traces/` directory
//! for analysis outputs. The manifest lists every artifact in its directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{self, DciScores, ForestConfig, OrthogonalityReport};
use crate::backend::{checkpoint, ParamStore, Real};
use crate::config::{Precision, Settings};
use crate::error::{Error, Result};
use crate::model::{Model, RunOptions};
use crate::sar::{word_sets_for, WordSets};
use crate::train::{eval_set, init_model, train_run, EvalPoint, Experiment, RunMetrics};

pub const MANIFEST: &str = "manifest";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_name: String,
    /// Merged key-value settings, loadable as a config file.
    pub settings: BTreeMap<String, String>,
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub precision: Precision,
    pub revision: String,
    pub out_dir: PathBuf,
    pub param_count: usize,
    pub aid_param_count: usize,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub final_acc: Option<f64>,
    pub best_acc: Option<f64>,
    /// Files in the run directory, relative to it.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let f = File::open(dir.join(MANIFEST))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join(format!("{MANIFEST}.tmp"));
        serde_json::to_writer_pretty(BufWriter::new(File::create(&tmp)?), self)?;
        fs::rename(tmp, dir.join(MANIFEST))?;
        Ok(())
    }

    pub fn add_artifact(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
            self.artifacts.sort();
        }
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// `git describe` of the working directory when available, else the crate
/// version.
pub fn revision() -> String {
    let git = std::process::Command::new("git").args(["describe", "--always", "--dirty"]).output();
    match git {
        Ok(o) if o.status.success() => format!("git:{}", String::from_utf8_lossy(&o.stdout).trim()),
        _ => format!("aid-tpr {}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn seed_dir(s: &Settings, seed: u64) -> PathBuf {
    s.out.join(&s.run_name).join(seed.to_string())
}

#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics: RunMetrics,
}

fn train_one<T: Real>(exp: &Experiment, seed: u64, dir: &Path, on_point: &(dyn Fn(u64, &EvalPoint) + Sync)) -> Result<RunMetrics> {
    Ok(train_run::<T>(exp, seed, Some(dir), |p| on_point(seed, p))?.metrics)
}

/// Trains every seed of `s`, `s.jobs` at a time.
pub fn train_settings(s: &Settings, on_point: &(dyn Fn(u64, &EvalPoint) + Sync)) -> Result<Vec<SeedOutcome>> {
    s.exp.validate()?;
    let run_seed = |seed: u64| -> Result<SeedOutcome> {
        let dir = seed_dir(s, seed);
        fs::create_dir_all(dir.join("traces"))?;
        let (model, store) = init_model::<f64>(&s.exp, seed)?;
        let mut manifest = RunManifest {
            run_name: s.run_name.clone(),
            settings: s.values.clone(),
            experiment: s.exp.clone(),
            seeds: vec![seed],
            precision: s.precision,
            revision: revision(),
            out_dir: dir.clone(),
            param_count: store.count(),
            aid_param_count: model.aid_param_count(),
            started_unix: now(),
            finished_unix: None,
            final_acc: None,
            best_acc: None,
            artifacts: vec!["metrics.csv".into(), "traces/".into()],
        };
        manifest.save(&dir)?;
        let metrics = match s.precision {
            Precision::F32 => train_one::<f32>(&s.exp, seed, &dir, on_point)?,
            Precision::F64 => train_one::<f64>(&s.exp, seed, &dir, on_point)?,
        };
        manifest.finished_unix = Some(now());
        manifest.final_acc = metrics.final_acc();
        manifest.best_acc = metrics.best_acc();
        manifest.add_artifact("checkpoint");
        manifest.add_artifact("checkpoint-best");
        manifest.save(&dir)?;
        Ok(SeedOutcome { seed, dir, metrics })
    };
    if s.jobs <= 1 || s.seeds.len() == 1 {
        return s.seeds.iter().map(|&seed| run_seed(seed)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", s.jobs)))?;
    use rayon::prelude::*;
    pool.install(|| s.seeds.par_iter().map(|&seed| run_seed(seed)).collect())
}

/// Runs of a sweep: one run per value, named `<run_name>-<key>-<value>`.
pub fn sweep_settings(base: &Settings, key: &str, values: &[String]) -> Result<Vec<Settings>> {
    values
        .iter()
        .map(|v| {
            let mut layers = base.values.clone();
            layers.insert(crate::config::normalize_key(key), v.clone());
            layers.insert("run_name".into(), format!("{}-{}-{}", base.run_name, key, v));
            Settings::from_values(layers)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Which {
    #[default]
    Final,
    Best,
}

/// A trained model restored from its run directory.
pub struct LoadedRun<T: Real> {
    pub manifest: RunManifest,
    pub model: Model,
    pub store: ParamStore<T>,
    pub ws: WordSets,
}

pub fn load_run<T: Real>(dir: &Path, which: Which) -> Result<LoadedRun<T>> {
    let manifest = RunManifest::load(dir)?;
    let (model, mut store) = init_model::<T>(&manifest.experiment, manifest.seed())?;
    let file = match which {
        Which::Final => "checkpoint",
        Which::Best => "checkpoint-best",
    };
    store.load_from(&checkpoint::load::<T>(&dir.join(file))?)?;
    let ws = word_sets_for(&manifest.experiment.sar)?;
    Ok(LoadedRun { manifest, model, store, ws })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalRequest {
    pub which: Which,
    pub n_iter_test: Option<usize>,
    /// Evaluation episodes; `None` uses the run's own evaluation set size.
    pub episodes: Option<usize>,
    pub ablate_memory: bool,
}

fn eval_typed<T: Real>(dir: &Path, req: EvalRequest) -> Result<f64> {
    let run = load_run::<T>(dir, req.which)?;
    let exp = &run.manifest.experiment;
    let mut cfg = run.model.cfg.clone();
    if let Some(n) = req.n_iter_test {
        cfg.update_aid(|a| a.n_iter = n);
    }
    let model = run.model.with_config(cfg)?;
    let eps = eval_set(&run.ws, &exp.sar, run.manifest.seed(), req.episodes.unwrap_or(exp.train.eval_episodes))?;
    crate::train::evaluate(&model, &run.store, &run.ws, &eps, RunOptions { train: false, ablate_memory: req.ablate_memory })
}

/// Accuracy of a trained run on its held-out evaluation set.
pub fn eval_run(dir: &Path, req: EvalRequest) -> Result<f64> {
    match RunManifest::load(dir)?.precision {
        Precision::F32 => eval_typed::<f32>(dir, req),
        Precision::F64 => eval_typed::<f64>(dir, req),
    }
}

fn write_file(dir: &Path, manifest: &mut RunManifest, rel: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    f(BufWriter::new(File::create(&path)?))?;
    manifest.add_artifact(rel);
    Ok(())
}

fn dci_typed<T: Real>(dir: &Path, episodes: usize, forest: ForestConfig) -> Result<(DciScores, Vec<Vec<f64>>)> {
    let mut run = load_run::<T>(dir, Which::Final)?;
    let exp = &run.manifest.experiment;
    let eps = eval_set(&run.ws, &exp.sar, run.manifest.seed(), episodes)?;
    let traces = analysis::collect_traces(&run.model, &run.store, &run.ws, &eps)?;
    let (scores, importance) = analysis::dci_from_traces(&traces, forest, run.manifest.seed())?;
    let m = &mut run.manifest;
    write_file(dir, m, "traces/dci_traces.csv", |w| analysis::write_traces(w, &traces))?;
    write_file(dir, m, "dci.csv", |mut w| {
        use std::io::Write;
        writeln!(w, "D,C,I")?;
        writeln!(w, "{},{},{}", scores.d, scores.c, scores.i)?;
        Ok(())
    })?;
    let rows: Vec<String> = crate::model::ENCODER_SLOTS.iter().map(|s| s.to_string()).collect();
    let cols = vec!["x".to_string(), "y".to_string()];
    write_file(dir, m, "dci_importance.csv", |w| analysis::write_labeled_matrix(w, &rows, &cols, &importance))?;
    m.save(dir)?;
    Ok((scores, importance))
}

/// Block-level DCI of a trained run on `episodes` evaluation episodes.
/// Writes the traces, `dci.csv` and the block importance matrix.
pub fn dci_run(dir: &Path, episodes: usize, forest: ForestConfig) -> Result<(DciScores, Vec<Vec<f64>>)> {
    match RunManifest::load(dir)?.precision {
        Precision::F32 => dci_typed::<f32>(dir, episodes, forest),
        Precision::F64 => dci_typed::<f64>(dir, episodes, forest),
    }
}

fn ortho_typed<T: Real>(dir: &Path, y: Option<usize>, n_x: usize) -> Result<OrthogonalityReport> {
    let mut run = load_run::<T>(dir, Which::Final)?;
    let ws = &run.ws;
    let y = y.unwrap_or(ws.y2[0]);
    if n_x < 2 || n_x > ws.x1.len() {
        return Err(Error::Insufficient(format!("need 2..={} distinct x, asked for {n_x}", ws.x1.len())));
    }
    let eps = analysis::ortho_episodes(ws, &run.manifest.experiment.sar, y, &ws.x1[..n_x], run.manifest.seed())?;
    let traces = analysis::collect_traces(&run.model, &run.store, ws, &eps)?;
    let report = analysis::orthogonality_report(&traces, y)?;
    let labels: Vec<String> = report.xs.iter().map(|x| format!("x{x}")).collect();
    let m = &mut run.manifest;
    write_file(dir, m, "traces/ortho_traces.csv", |w| analysis::write_traces(w, &traces))?;
    write_file(dir, m, "role_role.csv", |w| analysis::write_labeled_matrix(w, &labels, &labels, &report.role_role))?;
    write_file(dir, m, "role_unbind.csv", |w| analysis::write_labeled_matrix(w, &labels, &labels, &report.role_unbind))?;
    write_file(dir, m, "ortho.json", |w| Ok(serde_json::to_writer_pretty(w, &report)?))?;
    m.save(dir)?;
    Ok(report)
}

/// Cosine similarities between roles and unbinding operators of the first
/// `n_x` words of `X1`, all stored with `y` (default: the first word of `Y2`).
pub fn ortho_run(dir: &Path, y: Option<usize>, n_x: usize) -> Result<OrthogonalityReport> {
    match RunManifest::load(dir)?.precision {
        Precision::F32 => ortho_typed::<f32>(dir, y, n_x),
        Precision::F64 => ortho_typed::<f64>(dir, y, n_x),
    }
}
