//! Topical word embeddings.
//!
//! Skip-gram with negative sampling in which each center token contributes
//! two predictors of its context words: the word's own vector and the vector
//! of the topic the token was assigned to. Both share one set of context
//! (output) vectors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng as _;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model_store::format_float;
use crate::rng_from_seed;

const NEG_TABLE_SIZE: usize = 1_000_000;
const TOPIC_PREFIX: &str = "#topic_";

/// Word, topic and context vectors of a shared dimension. Vectors are stored
/// row-major, one row per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    word_vecs: Vec<f64>,
    topic_vecs: Vec<f64>,
    context_vecs: Option<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(
        dim: usize,
        tokens: Vec<String>,
        word_vecs: Vec<f64>,
        topic_vecs: Vec<f64>,
        context_vecs: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be at least 1".into()));
        }
        if word_vecs.len() != tokens.len() * dim {
            return Err(Error::DimensionMismatch(word_vecs.len(), tokens.len() * dim));
        }
        if !topic_vecs.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(topic_vecs.len(), dim));
        }
        if let Some(c) = &context_vecs {
            if c.len() != word_vecs.len() {
                return Err(Error::DimensionMismatch(c.len(), word_vecs.len()));
            }
        }
        let all_finite = word_vecs
            .iter()
            .chain(&topic_vecs)
            .chain(context_vecs.iter().flatten())
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("embedding contains non-finite values".into()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(Self {
            dim,
            tokens,
            index,
            word_vecs,
            topic_vecs,
            context_vecs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_words(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_topics(&self) -> usize {
        self.topic_vecs.len() / self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn word_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn word(&self, w: u32) -> &[f64] {
        &self.word_vecs[w as usize * self.dim..(w as usize + 1) * self.dim]
    }

    pub fn topic(&self, k: usize) -> &[f64] {
        &self.topic_vecs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn context(&self, w: u32) -> Option<&[f64]> {
        self.context_vecs
            .as_ref()
            .map(|c| &c[w as usize * self.dim..(w as usize + 1) * self.dim])
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &[f64]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        Self {
            word_vecs: scale(&self.word_vecs),
            topic_vecs: scale(&self.topic_vecs),
            context_vecs: self.context_vecs.as_deref().map(scale),
            ..self.clone()
        }
    }

    /// Writes `N dim` then one line per word and per topic (`#topic_k`), each
    /// followed by its coordinates.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("{} {}\n", self.num_words() + self.num_topics(), self.dim);
        let mut line = |name: &str, v: &[f64]| {
            out.push_str(name);
            for x in v {
                out.push(' ');
                out.push_str(&format_float(*x));
            }
            out.push('\n');
        };
        for (w, t) in self.tokens.iter().enumerate() {
            line(t, self.word(w as u32));
        }
        for k in 0..self.num_topics() {
            line(&format!("{TOPIC_PREFIX}{k}"), self.topic(k));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::malformed(path, 1, "missing header"))?;
        let (n, dim) = header
            .split_once(' ')
            .and_then(|(n, d)| Some((n.parse::<usize>().ok()?, d.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| Error::malformed(path, 1, "header must be `N dim`"))?;
        let mut tokens = Vec::new();
        let mut word_vecs = Vec::new();
        let mut topics: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut count = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let mut fields = line.split(' ');
            let name = fields.next().unwrap_or_default();
            let v: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::malformed(path, lineno, "bad coordinate"))?;
            if v.len() != dim {
                return Err(Error::malformed(path, lineno, format!("expected {dim} coordinates, found {}", v.len())));
            }
            match name.strip_prefix(TOPIC_PREFIX).and_then(|k| k.parse::<usize>().ok()) {
                Some(k) => topics.push((k, v)),
                None => {
                    tokens.push(name.to_string());
                    word_vecs.extend(v);
                }
            }
            count += 1;
        }
        if count != n {
            return Err(Error::malformed(path, 1, format!("header declares {n} entries, found {count}")));
        }
        topics.sort_by_key(|t| t.0);
        if topics.iter().enumerate().any(|(i, t)| t.0 != i) {
            return Err(Error::malformed(path, 1, "topic ids are not 0..K"));
        }
        let topic_vecs = topics.into_iter().flat_map(|t| t.1).collect();
        Self::new(dim, tokens, word_vecs, topic_vecs, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TweConfig {
    pub dim: usize,
    /// Context radius on each side of the center token.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for TweConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            step_size: 0.025,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TweOutput {
    pub table: EmbeddingTable,
    /// Mean pair loss per epoch, both predictors included.
    pub epoch_losses: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−ln σ(v·u_c) − Σ_n ln σ(−v·u_n)`.
pub fn pair_loss(v: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let pos = -sigmoid(dot(v, context)).ln();
    pos - negatives.iter().map(|u| sigmoid(-dot(v, u)).ln()).sum::<f64>()
}

/// Gradients of [`pair_loss`] with respect to each of its arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub v: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_loss_gradient(v: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let gc = sigmoid(dot(v, context)) - 1.0;
    let mut gv: Vec<f64> = context.iter().map(|u| gc * u).collect();
    let mut gneg = Vec::with_capacity(negatives.len());
    for u in negatives {
        let gn = sigmoid(dot(v, u));
        gv.iter_mut().zip(u.iter()).for_each(|(g, x)| *g += gn * x);
        gneg.push(v.iter().map(|x| gn * x).collect());
    }
    PairGradient {
        v: gv,
        context: v.iter().map(|x| gc * x).collect(),
        negatives: gneg,
    }
}

/// One SGD step on the pair loss, updating `v` and the context rows in
/// place. `targets[0]` is the positive context word, the rest are negatives.
/// Returns the loss before the update.
fn sgd_pair_step(v: &mut [f64], contexts: &mut [f64], dim: usize, targets: &[u32], lr: f64, grad_v: &mut [f64]) -> f64 {
    grad_v.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let u = &mut contexts[t as usize * dim..(t as usize + 1) * dim];
        let s = sigmoid(dot(v, u));
        let (g, l) = if i == 0 { (s - 1.0, -s.ln()) } else { (s, -(1.0 - s).ln()) };
        loss += l;
        for d in 0..dim {
            grad_v[d] += g * u[d];
            u[d] -= lr * g * v[d];
        }
    }
    for d in 0..dim {
        v[d] -= lr * grad_v[d];
    }
    loss
}

fn negative_table(counts: &[u64]) -> Vec<u32> {
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(NEG_TABLE_SIZE);
    let mut cum = 0.0;
    let mut w = 0usize;
    for i in 0..NEG_TABLE_SIZE {
        let target = (i as f64 + 0.5) / NEG_TABLE_SIZE as f64;
        while w + 1 < weights.len() && (cum + weights[w]) / total < target {
            cum += weights[w];
            w += 1;
        }
        table.push(w as u32);
    }
    table
}

/// Trains word and topic vectors on an LDA-annotated corpus.
/// `assignments[d][i]` is the topic of token `i` of document `d`.
pub fn train_twe(corpus: &Corpus, assignments: &[Vec<u32>], num_topics: usize, cfg: &TweConfig) -> Result<TweOutput> {
    if corpus.docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.dim == 0 || cfg.window == 0 || cfg.negatives == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidParameter("dim, window, negatives and epochs must be at least 1".into()));
    }
    if cfg.step_size.is_nan() || cfg.step_size <= 0.0 {
        return Err(Error::InvalidParameter("step size must be positive".into()));
    }
    if assignments.len() != corpus.docs.len()
        || corpus.docs.iter().zip(assignments).any(|(d, z)| d.len() != z.len())
    {
        return Err(Error::InvalidParameter("topic assignments do not align with corpus tokens".into()));
    }
    if let Some(&bad) = assignments.iter().flatten().find(|&&z| z as usize >= num_topics) {
        return Err(Error::OutOfRange {
            what: "topic",
            index: bad as usize,
            limit: num_topics,
        });
    }
    let v = corpus.vocab.len();
    let dim = cfg.dim;
    let mut rng = rng_from_seed(cfg.seed);
    let half = 0.5 / dim as f64;
    let mut word_vecs: Vec<f64> = (0..v * dim).map(|_| rng.random_range(-half..half)).collect();
    let mut topic_vecs: Vec<f64> = (0..num_topics * dim).map(|_| rng.random_range(-half..half)).collect();
    let mut contexts = vec![0.0; v * dim];

    let mut counts = vec![0u64; v];
    for doc in &corpus.docs {
        for &w in doc.token_ids() {
            counts[w as usize] += 1;
        }
    }
    let neg_table = negative_table(&counts);

    let pairs_per_epoch: usize = corpus
        .docs
        .iter()
        .map(|d| {
            let n = d.len();
            (0..n).map(|i| i.min(cfg.window) + (n - 1 - i).min(cfg.window)).sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let min_lr = cfg.step_size / 100.0;

    let mut targets = Vec::with_capacity(cfg.negatives + 1);
    let mut grad = vec![0.0; dim];
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut applications = 0usize;
        for (doc, z) in corpus.docs.iter().zip(assignments) {
            let ids = doc.token_ids();
            for (i, &center) in ids.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(ids.len() - 1);
                let topic = z[i] as usize;
                for j in (lo..=hi).filter(|&j| j != i) {
                    let lr = cfg.step_size - (cfg.step_size - min_lr) * processed as f64 / total_pairs;
                    let ctx = ids[j];
                    for use_topic in [false, true] {
                        targets.clear();
                        targets.push(ctx);
                        for _ in 0..cfg.negatives {
                            let n = neg_table[rng.random_range(0..neg_table.len())];
                            if n != ctx {
                                targets.push(n);
                            }
                        }
                        let vec = if use_topic {
                            &mut topic_vecs[topic * dim..(topic + 1) * dim]
                        } else {
                            &mut word_vecs[center as usize * dim..(center as usize + 1) * dim]
                        };
                        loss_sum += sgd_pair_step(vec, &mut contexts, dim, &targets, lr, &mut grad);
                        applications += 1;
                    }
                    processed += 1;
                }
            }
        }
        epoch_losses.push(loss_sum / applications.max(1) as f64);
    }

    let table = EmbeddingTable::new(dim, corpus.vocab.tokens().to_vec(), word_vecs, topic_vecs, Some(contexts))?;
    Ok(TweOutput { table, epoch_losses })
}

/// What to rank word vectors against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    Word(u32),
    Topic(usize),
}

fn cosine_or_zero(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Top `n` words by cosine against the query vector. A word query never
/// returns itself. Ties go to the smaller word id.
pub fn nearest_words(table: &EmbeddingTable, query: Query, n: usize) -> Result<Vec<(String, f64)>> {
    let (qv, skip) = match query {
        Query::Word(w) if (w as usize) < table.num_words() => (table.word(w), Some(w)),
        Query::Topic(k) if k < table.num_topics() => (table.topic(k), None),
        Query::Word(w) => {
            return Err(Error::OutOfRange {
                what: "word id",
                index: w as usize,
                limit: table.num_words(),
            })
        }
        Query::Topic(k) => {
            return Err(Error::OutOfRange {
                what: "topic",
                index: k,
                limit: table.num_topics(),
            })
        }
    };
    let mut scored: Vec<(u32, f64)> = (0..table.num_words() as u32)
        .filter(|&w| Some(w) != skip)
        .map(|w| (w, cosine_or_zero(qv, table.word(w))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored
        .into_iter()
        .map(|(w, c)| (table.tokens[w as usize].clone(), c))
        .collect())
}
