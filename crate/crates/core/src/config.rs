//! Flat key-value run settings.
//!
//! Settings come from three layers, later layers winning: built-in defaults,
//! an optional config file, and command-line flags. The file format is one
//! `key = value` per line; `#` and `;` start comments and blank lines are
//! ignored. Keys use the flag names with `-` or `_` interchangeably.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aid::AttnActivation;
use crate::error::{Error, Result};
use crate::train::Experiment;

/// Environment variable overriding the default output root.
pub const OUT_DIR_ENV: &str = "AID_OUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("precision must be f32 or f64, got `{s}`"))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// Every key understood in config files and as a flag.
pub const KEYS: &[&str] = &[
    "scale",
    "p",
    "n_pairs",
    "n_inputs",
    "n_iter",
    "n_iter_test",
    "use_aid",
    "no_query_residual",
    "no_final_concat",
    "attn_activation",
    "iters",
    "batch",
    "lr",
    "beta1",
    "beta2",
    "eval_every",
    "eval_episodes",
    "grad_clip",
    "seeds",
    "word_seed",
    "out",
    "run_name",
    "jobs",
    "precision",
];

/// Parses the flat config format into a key-value map.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", no + 1)))?;
        let key = normalize_key(k.trim());
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key `{}`", no + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn normalize_key(k: &str) -> String {
    k.trim_start_matches("--").replace('-', "_")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub exp: Experiment,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub run_name: String,
    pub jobs: usize,
    pub precision: Precision,
    /// Refinement passes at evaluation time; `None` keeps the trained value.
    pub n_iter_test: Option<usize>,
    /// The merged key-value layers these settings were built from.
    pub values: BTreeMap<String, String>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` takes true or false, got `{v}`"))),
    }
}

/// `"5"` means seeds `0..5`; `"3,7"` lists them and `"3,"` is the single seed 3.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if v.contains(',') {
        v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse("seeds", s)).collect::<Result<_>>()?
    } else {
        (0..parse::<u64>("seeds", v)?).collect()
    };
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    Ok(seeds)
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

impl Settings {
    /// Defaults overridden by `file` and then by `flags`.
    pub fn resolve(file: Option<&str>, flags: &[(String, String)]) -> Result<Self> {
        let mut values = match file {
            Some(text) => parse_config(text)?,
            None => BTreeMap::new(),
        };
        for (k, v) in flags {
            let key = normalize_key(k);
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown setting `{k}`")));
            }
            values.insert(key, v.clone());
        }
        Self::from_values(values)
    }

    pub fn from_values(values: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| values.get(k).map(String::as_str);
        let p = get("p").map(|v| parse::<f64>("p", v)).transpose()?.unwrap_or(0.5);
        let mut exp = match get("scale").unwrap_or("desk") {
            "desk" => Experiment::desk(p),
            "full" => Experiment::full(p),
            other => return Err(Error::Config(format!("scale must be desk or full, got `{other}`"))),
        };
        let mut s = Settings {
            seeds: (0..exp.train.n_seeds as u64).collect(),
            exp: exp.clone(),
            out: default_out(),
            run_name: "run".into(),
            jobs: 1,
            precision: Precision::F32,
            n_iter_test: None,
            values: BTreeMap::new(),
        };
        for (k, v) in &values {
            let v = v.as_str();
            match k.as_str() {
                "scale" | "p" => {}
                "n_pairs" => exp.sar.n_pairs = parse(k, v)?,
                "word_seed" => exp.sar.seed = parse(k, v)?,
                "n_inputs" => exp.model.set_n_inputs(parse(k, v)?),
                "n_iter" => {
                    let n: usize = parse(k, v)?;
                    exp.model.update_aid(|a| a.n_iter = n);
                }
                "n_iter_test" => s.n_iter_test = Some(parse(k, v)?),
                "use_aid" => exp.model.use_aid = parse_bool(k, v)?,
                "no_query_residual" => {
                    let off = parse_bool(k, v)?;
                    exp.model.update_aid(|a| a.use_query_residual = !off);
                }
                "no_final_concat" => {
                    let off = parse_bool(k, v)?;
                    exp.model.update_aid(|a| a.use_final_concat = !off);
                }
                "attn_activation" => {
                    let act: AttnActivation = v.parse().map_err(|_| Error::Config(format!("bad attn_activation `{v}`")))?;
                    exp.model.update_aid(|a| a.attn_activation = act);
                }
                "iters" => exp.train.iters = parse(k, v)?,
                "batch" => exp.train.batch_size = parse(k, v)?,
                "lr" => exp.train.lr = parse(k, v)?,
                "beta1" => exp.train.beta1 = parse(k, v)?,
                "beta2" => exp.train.beta2 = parse(k, v)?,
                "eval_every" => exp.train.eval_every = parse(k, v)?,
                "eval_episodes" => exp.train.eval_episodes = parse(k, v)?,
                "grad_clip" => exp.train.grad_clip = if v == "none" { None } else { Some(parse(k, v)?) },
                "seeds" => s.seeds = parse_seeds(v)?,
                "out" => s.out = PathBuf::from(v),
                "run_name" => s.run_name = v.to_string(),
                "jobs" => s.jobs = parse::<usize>(k, v)?.max(1),
                "precision" => s.precision = v.parse()?,
                other => return Err(Error::Config(format!("unknown setting `{other}`"))),
            }
        }
        if !values.contains_key("eval_every") && exp.train.eval_every > exp.train.iters {
            exp.train.eval_every = exp.train.iters;
        }
        exp.train.n_seeds = s.seeds.len();
        exp.sync();
        exp.validate()?;
        if s.run_name.is_empty() || s.run_name.contains(['/', '\\']) {
            return Err(Error::Config(format!("run_name `{}` must be a plain directory name", s.run_name)));
        }
        s.exp = exp;
        s.values = values;
        Ok(s)
    }

    /// The merged layers as config-file text.
    pub fn to_config_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
