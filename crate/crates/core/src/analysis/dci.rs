//! Block-level disentanglement, completeness and informativeness.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forest::{Forest, ForestConfig};
use crate::backend::rng::{stream, streams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DciScores {
    pub d: f64,
    pub c: f64,
    pub i: f64,
}

/// Entropy of `p` (which sums to one) in base `base`; zero when `base < 2`.
fn entropy(p: &[f64], base: usize) -> f64 {
    if base < 2 {
        return 0.0;
    }
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>() / (base as f64).ln()
}

/// D and C from a block-by-factor importance matrix `r[block][factor]`.
/// Blocks without importance carry no weight in D; factors without
/// importance are skipped in C.
pub fn dci_from_importance(r: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n_blocks = r.len();
    let n_factors = r.first().map_or(0, Vec::len);
    if n_blocks == 0 || n_factors == 0 || r.iter().any(|row| row.len() != n_factors) {
        return Err(Error::Shape("importance matrix must be a non-empty rectangle".into()));
    }
    if r.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::NonFinite("importances must be finite and non-negative".into()));
    }
    let total: f64 = r.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::Insufficient("all importances are zero".into()));
    }
    let mut d = 0.0;
    for row in r {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            let p: Vec<f64> = row.iter().map(|v| v / s).collect();
            d += s / total * (1.0 - entropy(&p, n_factors));
        }
    }
    let mut c = Vec::new();
    for k in 0..n_factors {
        let s: f64 = r.iter().map(|row| row[k]).sum();
        if s > 0.0 {
            let p: Vec<f64> = r.iter().map(|row| row[k] / s).collect();
            c.push(1.0 - entropy(&p, n_blocks));
        }
    }
    let c = c.iter().sum::<f64>() / c.len() as f64;
    Ok((d.clamp(0.0, 1.0), c.clamp(0.0, 1.0)))
}

/// Fits one forest per factor on a 70/30 split of `features` and sums
/// feature importances within each block (`blocks[b]` = feature indices).
/// Returns the scores and the importance matrix `[block][factor]`.
pub fn dci_block(
    features: &[Vec<f64>],
    factors: &[Vec<usize>],
    blocks: &[Vec<usize>],
    cfg: ForestConfig,
    seed: u64,
) -> Result<(DciScores, Vec<Vec<f64>>)> {
    let n = features.len();
    if n < 4 || factors.iter().any(|f| f.len() != n) || factors.is_empty() {
        return Err(Error::Insufficient(format!("{n} samples for {} factors", factors.len())));
    }
    let width = features[0].len();
    if blocks.iter().flatten().any(|&i| i >= width) {
        return Err(Error::Shape(format!("block index beyond feature width {width}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, streams::ANALYSIS, 0));
    let n_train = (n as f64 * 0.7).round() as usize;
    let (train, test) = order.split_at(n_train);
    let pick = |ix: &[usize]| ix.iter().map(|&i| features[i].clone()).collect::<Vec<_>>();
    let (x_train, x_test) = (pick(train), pick(test));

    let mut r = vec![vec![0.0; factors.len()]; blocks.len()];
    let mut accs = Vec::new();
    for (k, factor) in factors.iter().enumerate() {
        // Compact labels; BTreeMap keeps the mapping order-independent.
        let labels: BTreeMap<usize, usize> = factor.iter().map(|&v| (v, 0)).collect();
        if labels.len() < 2 {
            return Err(Error::Insufficient(format!("factor {k} takes a single value")));
        }
        let labels: BTreeMap<usize, usize> = labels.keys().enumerate().map(|(i, &v)| (v, i)).collect();
        let y: Vec<usize> = factor.iter().map(|v| labels[v]).collect();
        let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        let forest = Forest::fit(&x_train, &y_train, labels.len(), cfg, &mut stream(seed, streams::FOREST, k as u64))?;
        for (b, block) in blocks.iter().enumerate() {
            r[b][k] = block.iter().map(|&f| forest.importances[f]).sum();
        }
        accs.push(forest.accuracy(&x_test, &y_test));
    }
    let (d, c) = dci_from_importance(&r)?;
    let i = accs.iter().sum::<f64>() / accs.len() as f64;
    Ok((DciScores { d, c, i }, r))
}

/// Contiguous blocks of `width` features each.
pub fn contiguous_blocks(n_blocks: usize, width: usize) -> Vec<Vec<usize>> {
    (0..n_blocks).map(|b| (b * width..(b + 1) * width).collect()).collect()
}
