//! Random-forest classifier with impurity-based feature importances.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `round(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: 12, max_features: None, min_samples_split: 2 }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(usize),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(c) => return c,
                Node::Split { feature, threshold, left, right } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    /// Mean over trees of each tree's normalized impurity decrease.
    pub importances: Vec<f64>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    (0..counts.len()).fold(0, |best, k| if counts[k] > counts[best] { k } else { best })
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    cfg: ForestConfig,
    n_try: usize,
    total: f64,
    importance: Vec<f64>,
    nodes: Vec<Node>,
    rng: &'a mut R,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        idx.iter().for_each(|&i| c[self.y[i]] += 1);
        c
    }

    /// Best `(impurity decrease, feature, threshold)` over a random feature
    /// subset, scanning sorted values with running class counts.
    fn best_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<(f64, usize, f64)> {
        let n = idx.len();
        let parent = gini(counts, n);
        let n_features = self.x[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in sample(self.rng, n_features, self.n_try.min(n_features)) {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0usize; self.n_classes];
            let (mut sq_l, mut sq_r) = (0.0, counts.iter().map(|&c| (c * c) as f64).sum::<f64>());
            for k in 0..n - 1 {
                let c = self.y[order[k]];
                sq_l += (2 * left[c] + 1) as f64;
                let right_c = counts[c] - left[c];
                sq_r -= (2 * right_c - 1) as f64;
                left[c] += 1;
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let (nl, nr) = ((k + 1) as f64, (n - k - 1) as f64);
                // n_l * gini_l + n_r * gini_r, divided by n.
                let child = (nl - sq_l / nl + nr - sq_r / nr) / n as f64;
                let gain = parent - child;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, a + (b - a) / 2.0));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(majority(&counts)));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split {
            return id;
        }
        let Some((gain, feature, threshold)) = self.best_split(&idx, &counts) else { return id };
        if gain <= 0.0 {
            return id;
        }
        self.importance[feature] += gain * idx.len() as f64 / self.total;
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl Forest {
    /// Fits `cfg.n_trees` trees on bootstrap samples of `(x, y)`. Labels
    /// must lie in `0..n_classes`.
    pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[usize], n_classes: usize, cfg: ForestConfig, rng: &mut R) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Insufficient(format!("{} samples with {} labels", x.len(), y.len())));
        }
        let n_features = x[0].len();
        if n_features == 0 || x.iter().any(|r| r.len() != n_features) {
            return Err(Error::Shape("feature rows must share a non-zero width".into()));
        }
        if y.iter().any(|&c| c >= n_classes) {
            return Err(Error::Shape(format!("label out of range for {n_classes} classes")));
        }
        let n_try = cfg.max_features.unwrap_or(((n_features as f64).sqrt().round() as usize).max(1));
        let mut importances = vec![0.0; n_features];
        let mut trees = Vec::with_capacity(cfg.n_trees);
        for _ in 0..cfg.n_trees {
            let idx: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
            let mut b = Builder {
                x,
                y,
                n_classes,
                cfg,
                n_try,
                total: idx.len() as f64,
                importance: vec![0.0; n_features],
                nodes: Vec::new(),
                rng,
            };
            b.grow(idx, 0);
            let s: f64 = b.importance.iter().sum();
            if s > 0.0 {
                importances.iter_mut().zip(&b.importance).for_each(|(acc, v)| *acc += v / s);
            }
            trees.push(Tree { nodes: b.nodes });
        }
        let s: f64 = importances.iter().sum();
        if s > 0.0 {
            importances.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Forest { trees, n_classes, importances })
    }

    /// Majority vote over trees, ties to the smallest class.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        self.trees.iter().for_each(|t| votes[t.predict(x)] += 1);
        majority(&votes)
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let hits = x.iter().zip(y).filter(|(r, &c)| self.predict(r) == c).count();
        hits as f64 / y.len().max(1) as f64
    }
}
