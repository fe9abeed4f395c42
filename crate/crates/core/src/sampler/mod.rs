//! LDA and SentenceLDA: collapsed Gibbs training, and Gibbs or alias-table
//! Metropolis-Hastings inference against a frozen model.

mod alias;
mod conditional;
mod infer;
mod train;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::OnceLock;

pub use alias::AliasTable;
pub use conditional::{lda_conditional, normalize, normalize_log, slda_conditional};
pub use infer::{infer_gibbs, infer_mh, infer_mh_with_stats, mh_accept_ratio, MhStats};
pub use train::{train, TrainOutput, Trainer};

use crate::error::{Error, Result};

/// Tolerance for accepting user-supplied vectors as simplex points.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Lda,
    SentenceLda,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lda => "lda",
            ModelKind::SentenceLda => "slda",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lda" => Ok(ModelKind::Lda),
            "slda" => Ok(ModelKind::SentenceLda),
            other => Err(Error::UnknownModelKind(other.to_string())),
        }
    }
}

/// Number of topics and symmetric Dirichlet priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicModelParams {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl TopicModelParams {
    pub fn new(num_topics: usize, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self {
            num_topics,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// `alpha = 50 / K`, `beta = 0.01`.
    pub fn with_defaults(num_topics: usize) -> Result<Self> {
        Self::new(num_topics, 50.0 / num_topics.max(1) as f64, 0.01)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_topics == 0 {
            return Err(Error::InvalidParameter("number of topics must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Word-topic counts stored word-major: the `K` counts of one word are
/// contiguous, which is the access pattern of every conditional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordTopicCounts {
    num_topics: usize,
    vocab_size: usize,
    counts: Vec<u32>,
    totals: Vec<u64>,
}

impl WordTopicCounts {
    pub fn zeros(num_topics: usize, vocab_size: usize) -> Self {
        Self {
            num_topics,
            vocab_size,
            counts: vec![0; num_topics * vocab_size],
            totals: vec![0; num_topics],
        }
    }

    /// Builds the table from a word-major `V × K` count matrix; topic totals
    /// are recomputed.
    pub fn from_word_major(num_topics: usize, vocab_size: usize, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != num_topics * vocab_size {
            return Err(Error::DimensionMismatch(counts.len(), num_topics * vocab_size));
        }
        let mut totals = vec![0u64; num_topics];
        for row in counts.chunks_exact(num_topics) {
            for (t, &c) in totals.iter_mut().zip(row) {
                *t += u64::from(c);
            }
        }
        Ok(Self {
            num_topics,
            vocab_size,
            counts,
            totals,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Counts of word `w` in every topic.
    #[inline]
    pub fn row(&self, w: u32) -> &[u32] {
        let k = self.num_topics;
        &self.counts[w as usize * k..(w as usize + 1) * k]
    }

    #[inline]
    pub fn get(&self, k: usize, w: u32) -> u32 {
        self.counts[w as usize * self.num_topics + k]
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn as_word_major(&self) -> &[u32] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.totals.iter().sum()
    }

    #[inline]
    pub(crate) fn add(&mut self, k: usize, w: u32) {
        self.counts[w as usize * self.num_topics + k] += 1;
        self.totals[k] += 1;
    }

    #[inline]
    pub(crate) fn remove(&mut self, k: usize, w: u32) {
        self.counts[w as usize * self.num_topics + k] -= 1;
        self.totals[k] -= 1;
    }

    /// True when every topic total equals the sum of its column.
    pub fn is_consistent(&self) -> bool {
        let mut sums = vec![0u64; self.num_topics];
        for row in self.counts.chunks_exact(self.num_topics) {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += u64::from(c);
            }
        }
        sums == self.totals
    }
}

/// A trained topic model. Counts are frozen; `phi` is cached word-major.
#[derive(Debug)]
pub struct TopicModel {
    params: TopicModelParams,
    kind: ModelKind,
    counts: WordTopicCounts,
    phi: Vec<f64>,
    word_alias: OnceLock<Vec<AliasTable>>,
}

impl Clone for TopicModel {
    fn clone(&self) -> Self {
        Self::new(self.params, self.kind, self.counts.clone()).expect("valid model")
    }
}

impl PartialEq for TopicModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.kind == other.kind && self.counts == other.counts
    }
}

impl TopicModel {
    pub fn new(params: TopicModelParams, kind: ModelKind, counts: WordTopicCounts) -> Result<Self> {
        params.validate()?;
        if counts.num_topics() != params.num_topics {
            return Err(Error::DimensionMismatch(counts.num_topics(), params.num_topics));
        }
        if counts.vocab_size() == 0 {
            return Err(Error::EmptyVocabulary);
        }
        let k = params.num_topics;
        let v = counts.vocab_size() as f64;
        let denom: Vec<f64> = counts
            .totals()
            .iter()
            .map(|&n| n as f64 + v * params.beta)
            .collect();
        let phi = counts
            .as_word_major()
            .chunks_exact(k)
            .flat_map(|row| {
                row.iter()
                    .zip(&denom)
                    .map(|(&c, &d)| (f64::from(c) + params.beta) / d)
            })
            .collect();
        Ok(Self {
            params,
            kind,
            counts,
            phi,
            word_alias: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &TopicModelParams {
        &self.params
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_topics(&self) -> usize {
        self.params.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.vocab_size()
    }

    pub fn counts(&self) -> &WordTopicCounts {
        &self.counts
    }

    /// `(n_kw + β) / (n_k + Vβ)`.
    #[inline]
    pub fn phi(&self, k: usize, w: u32) -> f64 {
        self.phi[w as usize * self.params.num_topics + k]
    }

    /// `phi(k, w)` for every topic `k`.
    #[inline]
    pub fn phi_column(&self, w: u32) -> &[f64] {
        let k = self.params.num_topics;
        &self.phi[w as usize * k..(w as usize + 1) * k]
    }

    /// Same model with a different topic-word prior.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let params = TopicModelParams { beta, ..self.params };
        Self::new(params, self.kind, self.counts.clone())
    }

    /// Per-word alias tables over `phi(·, w)`, built on first use.
    pub fn word_alias_tables(&self) -> &[AliasTable] {
        self.word_alias.get_or_init(|| {
            (0..self.vocab_size() as u32)
                .map(|w| AliasTable::new(self.phi_column(w)).expect("phi is positive"))
                .collect()
        })
    }

    pub(crate) fn check_document(&self, doc: &crate::corpus::Document) -> Result<()> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let max = doc.max_token_id() as usize;
        if max >= self.vocab_size() {
            return Err(Error::OutOfRange {
                what: "word id",
                index: max,
                limit: self.vocab_size(),
            });
        }
        Ok(())
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution(Vec<f64>);

impl TopicDistribution {
    /// Accepts non-negative finite entries summing to 1 within
    /// [`SIMPLEX_TOLERANCE`].
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter("distribution entries must be finite and non-negative".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self(p))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || w.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidParameter("weights must be non-negative with a positive sum".into()));
        }
        w.iter_mut().for_each(|x| *x /= sum);
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for TopicDistribution {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
