//! Post-hoc analysis of generated TPR components.
//!
//! Traces record the routed AID outputs of every step with the step's ground
//! truth: encoder components `(role1, role2, filler)` during discovery and
//! decoder components `(n0, e_1..)` during inference. From them we compute
//! block-level DCI scores and cosine-similarity matrices between roles and
//! unbinding operators.

pub mod dci;
pub mod forest;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::backend::rng::{stream, streams};
use crate::backend::{ParamStore, Real};
use crate::error::{Error, Result};
use crate::model::{Model, RunOptions};
use crate::sar::{batch_steps, generate_episode, Episode, SarConfig, Split, WordSets};

pub use dci::{contiguous_blocks, dci_block, dci_from_importance, DciScores};
pub use forest::{Forest, ForestConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Discovery,
    Inference,
}

impl Phase {
    fn as_str(self) -> &'static str {
        match self {
            Phase::Discovery => "discovery",
            Phase::Inference => "inference",
        }
    }
}

/// Components of one step of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTrace {
    pub phase: Phase,
    pub episode: usize,
    pub step: usize,
    pub x: usize,
    /// The stored `y` in discovery, the target in inference.
    pub y: usize,
    pub components: Vec<Vec<f64>>,
}

/// Runs `episodes` in evaluation mode and records one trace per step.
pub fn collect_traces<T: Real>(
    model: &Model,
    store: &ParamStore<T>,
    ws: &WordSets,
    episodes: &[Episode],
) -> Result<Vec<ComponentTrace>> {
    let mut out = Vec::new();
    let mut rng = stream(0, streams::ANALYSIS, 1);
    let opts = RunOptions { train: false, ablate_memory: false };
    for (chunk_no, chunk) in episodes.chunks(128).enumerate() {
        let (steps, _) = batch_steps(chunk, ws)?;
        let mut g = crate::backend::Graph::<T>::new();
        let vars = model.forward(&mut g, store, &steps, opts, &mut rng)?;
        let row = |g: &crate::backend::Graph<T>, v, b: usize| g.value(v).row(b).iter().map(|z| z.to_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>();
        for (b, ep) in chunk.iter().enumerate() {
            let episode = chunk_no * 128 + b;
            let np = ep.discovery.len();
            for (t, sv) in vars.iter().enumerate() {
                let rec = if t < np {
                    let (x, y) = ep.discovery[t];
                    let components = [sv.role1, sv.role2, sv.filler].iter().map(|&v| row(&g, v, b)).collect();
                    ComponentTrace { phase: Phase::Discovery, episode, step: t, x, y, components }
                } else {
                    let q = t - np;
                    let components = std::iter::once(sv.n0).chain(sv.hops.iter().copied()).map(|v| row(&g, v, b)).collect();
                    ComponentTrace { phase: Phase::Inference, episode, step: t, x: ep.queries[q], y: ep.targets[q], components }
                };
                out.push(rec);
            }
        }
    }
    Ok(out)
}

/// One line per record:
/// `phase,episode,step,x,y,n_components,d,v_0,...,v_{n_components*d-1}`.
pub fn write_traces<W: Write>(mut out: W, traces: &[ComponentTrace]) -> Result<()> {
    for t in traces {
        let d = t.components.first().map_or(0, Vec::len);
        write!(out, "{},{},{},{},{},{},{}", t.phase.as_str(), t.episode, t.step, t.x, t.y, t.components.len(), d)?;
        for v in t.components.iter().flatten() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_traces<R: BufRead>(input: R) -> Result<Vec<ComponentTrace>> {
    let mut out = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("trace line {}: `{}`", no + 1, line.chars().take(60).collect::<String>()));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 7 {
            return Err(bad());
        }
        let phase = match f[0] {
            "discovery" => Phase::Discovery,
            "inference" => Phase::Inference,
            _ => return Err(bad()),
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let (n, d) = (int(f[5])?, int(f[6])?);
        if f.len() != 7 + n * d {
            return Err(bad());
        }
        let vals = f[7..].iter().map(|s| s.parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        out.push(ComponentTrace {
            phase,
            episode: int(f[1])?,
            step: int(f[2])?,
            x: int(f[3])?,
            y: int(f[4])?,
            components: vals.chunks(d.max(1)).map(<[f64]>::to_vec).collect(),
        });
    }
    Ok(out)
}

/// `M[i][j] = cos(a_i, b_j)`; pairs involving a zero vector give 0.
pub fn cosine_matrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: Vec<f64> = b.iter().map(|v| norm(v)).collect();
    a.iter()
        .map(|u| {
            let nu = norm(u);
            b.iter()
                .zip(&nb)
                .map(|(v, &nv)| {
                    if nu == 0.0 || nv == 0.0 {
                        0.0
                    } else {
                        u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>() / (nu * nv)
                    }
                })
                .collect()
        })
        .collect()
}

fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&p| b.iter().map(move |&q| p * q)).collect()
}

/// Block-level DCI over discovery traces, with `(role1, role2, filler)` as
/// blocks and `(x, y)` as factors.
pub fn dci_from_traces(traces: &[ComponentTrace], cfg: ForestConfig, seed: u64) -> Result<(DciScores, Vec<Vec<f64>>)> {
    let enc: Vec<&ComponentTrace> = traces.iter().filter(|t| t.phase == Phase::Discovery).collect();
    let (n_blocks, width) = match enc.first() {
        Some(t) => (t.components.len(), t.components.first().map_or(0, Vec::len)),
        None => return Err(Error::Insufficient("no discovery traces".into())),
    };
    let features: Vec<Vec<f64>> = enc.iter().map(|t| t.components.concat()).collect();
    let factors = vec![enc.iter().map(|t| t.x).collect(), enc.iter().map(|t| t.y).collect()];
    dci_block(&features, &factors, &contiguous_blocks(n_blocks, width), cfg, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub y: usize,
    /// Distinct x values, in matrix order.
    pub xs: Vec<usize>,
    /// Cosines between the bound roles `role1 ⊗ role2` of different x.
    pub role_role: Vec<Vec<f64>>,
    /// `[i][j]`: role of `xs[i]` against the unbinding operator
    /// `n0 ⊗ e_1` that queried `xs[j]`.
    pub role_unbind: Vec<Vec<f64>>,
    pub mean_offdiag_role_role: f64,
    pub mean_diag_role_unbind: f64,
    pub mean_offdiag_role_unbind: f64,
}

fn diag_offdiag(m: &[Vec<f64>]) -> (f64, f64) {
    let n = m.len();
    let diag = (0..n).map(|i| m[i][i]).sum::<f64>() / n as f64;
    let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j]).sum();
    (diag, off / (n * (n - 1)) as f64)
}

/// Role and unbinding similarities for varying x with `y` fixed. For each
/// distinct x stored with `y`, the first such discovery record gives the
/// role and the inference record of the same episode that queries x gives
/// the unbinding operator.
pub fn orthogonality_report(traces: &[ComponentTrace], y: usize) -> Result<OrthogonalityReport> {
    let mut picked: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in traces.iter().filter(|t| t.phase == Phase::Discovery && t.y == y) {
        if picked.contains_key(&t.x) || t.components.len() < 2 {
            continue;
        }
        let query = traces
            .iter()
            .find(|q| q.phase == Phase::Inference && q.episode == t.episode && q.x == t.x && q.components.len() >= 2);
        if let Some(q) = query {
            picked.insert(t.x, (outer(&t.components[0], &t.components[1]), outer(&q.components[0], &q.components[1])));
        }
    }
    if picked.len() < 2 {
        return Err(Error::Insufficient(format!("traces hold {} distinct x paired with y = {y}", picked.len())));
    }
    let xs: Vec<usize> = picked.keys().copied().collect();
    let roles: Vec<Vec<f64>> = picked.values().map(|v| v.0.clone()).collect();
    let unbind: Vec<Vec<f64>> = picked.values().map(|v| v.1.clone()).collect();
    let role_role = cosine_matrix(&roles, &roles);
    let role_unbind = cosine_matrix(&roles, &unbind);
    let (_, mean_offdiag_role_role) = diag_offdiag(&role_role);
    let (mean_diag_role_unbind, mean_offdiag_role_unbind) = diag_offdiag(&role_unbind);
    Ok(OrthogonalityReport { y, xs, role_role, role_unbind, mean_offdiag_role_role, mean_diag_role_unbind, mean_offdiag_role_unbind })
}

/// Episodes for the orthogonality analysis: one evaluation episode per `x`
/// whose first pair is `(x, y)`, the rest drawn as usual.
pub fn ortho_episodes(ws: &WordSets, sar: &SarConfig, y: usize, xs: &[usize], seed: u64) -> Result<Vec<Episode>> {
    let mut out = Vec::with_capacity(xs.len());
    let mut index = 0u64;
    for &x in xs {
        loop {
            let mut ep = generate_episode(ws, sar, Split::Eval, seed, index)?;
            index += 1;
            if index > 1_000_000 {
                return Err(Error::Insufficient("cannot place the probe pair".into()));
            }
            if ep.discovery[1..].iter().any(|&(a, b)| a == x || b == y) {
                continue;
            }
            let old = ep.discovery[0];
            ep.discovery[0] = (x, y);
            for (q, t) in ep.queries.iter_mut().zip(ep.targets.iter_mut()) {
                if *q == old.0 {
                    (*q, *t) = (x, y);
                }
            }
            out.push(ep);
            break;
        }
    }
    Ok(out)
}

/// CSV with a header of column labels and a label in front of each row.
pub fn write_labeled_matrix<W: Write>(mut out: W, rows: &[String], cols: &[String], m: &[Vec<f64>]) -> Result<()> {
    writeln!(out, ",{}", cols.join(","))?;
    for (label, row) in rows.iter().zip(m) {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{label},{}", vals.join(","))?;
    }
    Ok(())
}
