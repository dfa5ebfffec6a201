//! Systematic associative recall episodes.
//!
//! An episode shows `n_pairs` items `(x, y)` (discovery phase) and then asks
//! for the `y` of every `x` again in a fresh order (inference phase).
//! Training episodes combine `X1` with `Y1`, `X2` with `Y2`, and `X3` with
//! all of `Y`; evaluation episodes use the held-out combination `X1 × Y2`.
//! `p = |X3| / (|X2| + |X3|)` controls how much combinatorial variety
//! training sees.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::rng::{stream, streams};
use crate::backend::{lit, Real, Tensor};
use crate::error::{Error, Result};
use crate::model::StepTokens;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Eval => "eval",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SarConfig {
    pub p: f64,
    pub n_pairs: usize,
    pub d_embed: usize,
    pub n_x1: usize,
    /// `|X2 ∪ X3|`.
    pub n_x23: usize,
    pub n_y1: usize,
    pub n_y2: usize,
    /// Seed of the word-set split.
    pub seed: u64,
}

impl SarConfig {
    /// Reduced vocabulary that keeps the combinatorial structure.
    pub fn desk(p: f64) -> Self {
        SarConfig { p, n_pairs: 4, d_embed: 50, n_x1: 60, n_x23: 60, n_y1: 40, n_y2: 40, seed: 0 }
    }

    /// Four blocks of 250 words.
    pub fn full(p: f64) -> Self {
        SarConfig { n_x1: 250, n_x23: 250, n_y1: 250, n_y2: 250, ..Self::desk(p) }
    }

    pub fn n_words(&self) -> usize {
        self.n_x1 + self.n_x23 + self.n_y1 + self.n_y2
    }

    pub fn n_classes(&self) -> usize {
        self.n_y1 + self.n_y2
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.n_pairs == 0 || self.n_x1 == 0 || self.n_y1 == 0 || self.n_y2 == 0 || self.n_x23 == 0 || self.d_embed == 0 {
            return Err(Error::Config(format!("word sets and episode length must be non-empty: {self:?}")));
        }
        Ok(())
    }
}

/// Disjoint word sets over ids `0..n_words`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordSets {
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
    pub x3: Vec<usize>,
    pub y1: Vec<usize>,
    pub y2: Vec<usize>,
    /// Output class of each word id, `None` for x words.
    class: Vec<Option<usize>>,
}

impl WordSets {
    pub fn n_words(&self) -> usize {
        self.class.len()
    }

    /// `Y = Y1 ∪ Y2` in class order.
    pub fn y_all(&self) -> Vec<usize> {
        self.y1.iter().chain(&self.y2).copied().collect()
    }

    pub fn class_of(&self, y: usize) -> Result<usize> {
        self.class.get(y).copied().flatten().ok_or(Error::UnknownWord(y))
    }

    /// The word id of an output class.
    pub fn word_of_class(&self, class: usize) -> usize {
        if class < self.y1.len() {
            self.y1[class]
        } else {
            self.y2[class - self.y1.len()]
        }
    }

    /// `|X3| / (|X2| + |X3|)`.
    pub fn p(&self) -> f64 {
        self.x3.len() as f64 / (self.x2.len() + self.x3.len()) as f64
    }
}

/// Splits `words` into contiguous blocks `X1 | X2 ∪ X3 | Y1 | Y2` of the
/// given sizes, then moves `round(p · |X2 ∪ X3|)` words of the middle block,
/// chosen by `seed`, into `X3`.
pub fn build_word_sets(words: &[usize], sizes: [usize; 4], p: f64, seed: u64) -> Result<WordSets> {
    let total: usize = sizes.iter().sum();
    if total != words.len() {
        return Err(Error::Config(format!("word-set sizes {sizes:?} sum to {total}, not {}", words.len())));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("p = {p} outside [0, 1]")));
    }
    if words.iter().collect::<HashSet<_>>().len() != words.len() {
        return Err(Error::Config("word list contains duplicates".into()));
    }
    let [a, b, c, _] = sizes;
    let x1 = words[..a].to_vec();
    let mut x23 = words[a..a + b].to_vec();
    let y1 = words[a + b..a + b + c].to_vec();
    let y2 = words[a + b + c..].to_vec();
    let n3 = (p * b as f64).round() as usize;
    x23.shuffle(&mut stream(seed, streams::WORDS, 0));
    let mut x3 = x23[..n3].to_vec();
    let mut x2 = x23[n3..].to_vec();
    x2.sort_unstable();
    x3.sort_unstable();
    let n_words = words.iter().max().map_or(0, |m| m + 1);
    let mut class = vec![None; n_words];
    for (k, &y) in y1.iter().chain(&y2).enumerate() {
        class[y] = Some(k);
    }
    Ok(WordSets { x1, x2, x3, y1, y2, class })
}

/// Word sets for `cfg` over ids `0..cfg.n_words()`.
pub fn word_sets_for(cfg: &SarConfig) -> Result<WordSets> {
    cfg.validate()?;
    let words: Vec<usize> = (0..cfg.n_words()).collect();
    build_word_sets(&words, [cfg.n_x1, cfg.n_x23, cfg.n_y1, cfg.n_y2], cfg.p, cfg.seed)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub split: Split,
    #[serde(rename = "pairs")]
    pub discovery: Vec<(usize, usize)>,
    pub queries: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Episode {
    /// Number of input steps: one per item in each phase.
    pub fn len(&self) -> usize {
        self.discovery.len() + self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discovery.is_empty()
    }
}

fn pick<R: Rng + ?Sized>(pool: &[usize], used: &HashSet<usize>, rng: &mut R) -> Option<usize> {
    let free: Vec<usize> = pool.iter().copied().filter(|w| !used.contains(w)).collect();
    free.choose(rng).copied()
}

/// Generates episode `index` of `split`. The result depends only on
/// `(seed, split, index)` and the word sets.
pub fn generate_episode(ws: &WordSets, cfg: &SarConfig, split: Split, seed: u64, index: u64) -> Result<Episode> {
    let ns = match split {
        Split::Train => streams::TRAIN_EPISODES,
        Split::Eval => streams::EVAL_EPISODES,
    };
    let mut rng = stream(seed, ns, index);
    let y_all = ws.y_all();
    let types: Vec<(&[usize], &[usize])> = match split {
        Split::Train => vec![(&ws.x1, &ws.y1), (&ws.x2, &ws.y2), (&ws.x3, &y_all)],
        Split::Eval => vec![(&ws.x1, &ws.y2)],
    };
    let (mut used_x, mut used_y) = (HashSet::new(), HashSet::new());
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    for _ in 0..cfg.n_pairs {
        let legal: Vec<_> = types
            .iter()
            .filter(|(xs, ys)| xs.iter().any(|w| !used_x.contains(w)) && ys.iter().any(|w| !used_y.contains(w)))
            .collect();
        let (xs, ys) = legal.choose(&mut rng).ok_or_else(|| {
            Error::Insufficient(format!("word sets cannot supply {} distinct {split} pairs", cfg.n_pairs))
        })?;
        let x = pick(xs, &used_x, &mut rng).expect("checked above");
        let y = pick(ys, &used_y, &mut rng).expect("checked above");
        used_x.insert(x);
        used_y.insert(y);
        pairs.push((x, y));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let queries = order.iter().map(|&i| pairs[i].0).collect();
    let targets = order.iter().map(|&i| pairs[i].1).collect();
    Ok(Episode { split, discovery: pairs, queries, targets })
}

/// Flags of step `t` in an episode with `n_pairs` items per phase.
pub fn flags_at(t: usize, n_pairs: usize) -> [f64; 2] {
    [if t == 0 { 1.0 } else { 0.0 }, if t == n_pairs { 1.0 } else { 0.0 }]
}

/// Dense encoding of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedEpisode<T> {
    /// One `2 d_embed + 2` vector per step.
    pub inputs: Vec<Vec<T>>,
    /// Steps that carry a loss (the inference phase).
    pub loss_positions: Vec<usize>,
    /// Output class per loss position.
    pub targets: Vec<usize>,
}

/// `[emb(x) ++ emb(y) ++ flags]` in discovery, `[emb(x) ++ 0 ++ flags]` in
/// inference. `embeddings` is `[n_words, d_embed]`.
pub fn encode_episode<T: Real>(ep: &Episode, ws: &WordSets, embeddings: &Tensor<T>) -> Result<EncodedEpisode<T>> {
    let (n, d) = (embeddings.rows(), embeddings.last_dim());
    let row = |w: usize| if w < n { Ok(embeddings.row(w)) } else { Err(Error::UnknownWord(w)) };
    let np = ep.discovery.len();
    let mut inputs = Vec::with_capacity(ep.len());
    let steps = ep.discovery.iter().map(|&(x, y)| (x, Some(y))).chain(ep.queries.iter().map(|&x| (x, None)));
    for (t, (x, y)) in steps.enumerate() {
        let mut v = row(x)?.to_vec();
        match y {
            Some(y) => v.extend_from_slice(row(y)?),
            None => v.extend(std::iter::repeat_n(T::zero(), d)),
        }
        v.extend(flags_at(t, np).map(lit::<T>));
        inputs.push(v);
    }
    let targets = ep.targets.iter().map(|&y| ws.class_of(y)).collect::<Result<Vec<_>>>()?;
    Ok(EncodedEpisode { inputs, loss_positions: (np..2 * np).collect(), targets })
}

/// A batch of equally long episodes as model steps, plus the target classes
/// of each inference step (`targets[q][b]`).
pub fn batch_steps(episodes: &[Episode], ws: &WordSets) -> Result<(Vec<StepTokens>, Vec<Vec<usize>>)> {
    let np = episodes.first().map_or(0, |e| e.discovery.len());
    if np == 0 || episodes.iter().any(|e| e.discovery.len() != np || e.queries.len() != np) {
        return Err(Error::Shape("episodes in a batch must share a non-zero length".into()));
    }
    let mut steps = Vec::with_capacity(2 * np);
    for t in 0..np {
        steps.push(StepTokens {
            x: episodes.iter().map(|e| e.discovery[t].0).collect(),
            y: Some(episodes.iter().map(|e| e.discovery[t].1).collect()),
            flags: flags_at(t, np),
        });
    }
    let mut targets = Vec::with_capacity(np);
    for q in 0..np {
        steps.push(StepTokens { x: episodes.iter().map(|e| e.queries[q]).collect(), y: None, flags: flags_at(np + q, np) });
        targets.push(episodes.iter().map(|e| ws.class_of(e.targets[q])).collect::<Result<Vec<_>>>()?);
    }
    Ok((steps, targets))
}

/// Writes one JSON record per episode.
pub fn write_episodes_jsonl<W: Write>(mut out: W, episodes: &[Episode]) -> Result<()> {
    for ep in episodes {
        serde_json::to_writer(&mut out, ep)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_episodes_jsonl<R: BufRead>(input: R) -> Result<Vec<Episode>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// UTF-8 word list, one token per line; blank lines are skipped.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let words: Vec<String> =
        fs::read_to_string(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if words.iter().collect::<HashSet<_>>().len() != words.len() {
        return Err(Error::Format(format!("{} contains duplicate tokens", path.display())));
    }
    Ok(words)
}
