//! Semantic representation and matching over topic distributions and
//! embeddings. All logarithms are natural.

mod kmeans;

use std::collections::HashSet;

pub use kmeans::{cluster_topic_distributions, Clustering};

use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};
use crate::sampler::{TopicModel, SIMPLEX_TOLERANCE};
use crate::twe::EmbeddingTable;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWord {
    pub token: String,
    pub score: f64,
}

fn check_simplex(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || p.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::NotNormalized(sum));
    }
    Ok(())
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// `−Σ p ln p`, with `0 ln 0 = 0`.
pub fn topic_entropy(p: &[f64]) -> Result<f64> {
    check_simplex(p)?;
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_same_len(a, b)?;
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Unweighted mean of the word vectors of the in-vocabulary tokens.
pub fn embed_short_text<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Result<Vec<f64>> {
    let ids: Vec<u32> = tokens.iter().filter_map(|t| table.word_id(t.as_ref())).collect();
    if ids.is_empty() {
        return Err(Error::AllOutOfVocabulary);
    }
    let mut mean = vec![0.0; table.dim()];
    for &w in &ids {
        mean.iter_mut().zip(table.word(w)).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= ids.len() as f64);
    Ok(mean)
}

/// Log-probability of a short text under a long text's topic mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortLongScore {
    /// `Σ_w ln Σ_k phi(k, w) · p[k]` over in-vocabulary query words.
    pub log_prob: f64,
    pub skipped_oov: usize,
}

pub fn short_long_similarity<S: AsRef<str>>(
    query: &[S],
    doc_dist: &[f64],
    model: &TopicModel,
    vocab: &Vocabulary,
) -> Result<ShortLongScore> {
    if doc_dist.len() != model.num_topics() {
        return Err(Error::DimensionMismatch(doc_dist.len(), model.num_topics()));
    }
    let mut log_prob = 0.0;
    let mut used = 0;
    let mut skipped_oov = 0;
    for tok in query {
        match vocab.id(tok.as_ref()) {
            Some(w) => {
                let mix: f64 = model.phi_column(w).iter().zip(doc_dist).map(|(a, b)| a * b).sum();
                log_prob += mix.ln();
                used += 1;
            }
            None => skipped_oov += 1,
        }
    }
    if used == 0 {
        return Err(Error::AllOutOfVocabulary);
    }
    Ok(ShortLongScore { log_prob, skipped_oov })
}

/// Scores each distinct non-stopword of `doc` by `Σ_k cos(v_w, z_k) · p[k]`
/// and returns the top `top_n`, ties broken by ascending word id. Word ids in
/// `doc` index the table's words.
pub fn keyword_scores(
    doc: &Document,
    doc_dist: &[f64],
    table: &EmbeddingTable,
    top_n: usize,
    stopwords: Option<&HashSet<String>>,
) -> Result<Vec<ScoredWord>> {
    if doc.is_empty() {
        return Err(Error::EmptyDocument);
    }
    if doc_dist.len() != table.num_topics() {
        return Err(Error::DimensionMismatch(doc_dist.len(), table.num_topics()));
    }
    let mut ids: Vec<u32> = doc.token_ids().to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut scored = Vec::new();
    for w in ids {
        if w as usize >= table.num_words() {
            return Err(Error::OutOfRange {
                what: "word id",
                index: w as usize,
                limit: table.num_words(),
            });
        }
        let token = &table.tokens()[w as usize];
        if stopwords.is_some_and(|s| s.contains(token)) {
            continue;
        }
        let mut score = 0.0;
        for (k, &p) in doc_dist.iter().enumerate() {
            score += cosine_similarity(table.word(w), table.topic(k))? * p;
        }
        scored.push((w, score));
    }
    if scored.is_empty() {
        return Err(Error::NoCandidates);
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(top_n);
    Ok(scored
        .into_iter()
        .map(|(w, score)| ScoredWord {
            token: table.tokens()[w as usize].clone(),
            score,
        })
        .collect())
}

/// `(1/√2) · ‖√p − √q‖₂`.
pub fn hellinger_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok(s.sqrt() / std::f64::consts::SQRT_2)
}

/// `Σ_{p_i > 0} p_i ln(p_i / q_i)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation(i));
            }
            d += a * (a / b).ln();
        }
    }
    Ok(d.max(0.0))
}

/// `(KL(p‖m) + KL(q‖m)) / 2` with `m = (p + q) / 2`.
pub fn jensen_shannon_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            d += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            d += 0.5 * b * (b / m).ln();
        }
    }
    Ok(d.max(0.0))
}
