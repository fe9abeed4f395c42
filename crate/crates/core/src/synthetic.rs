//! Synthetic ground-truth data for checking topic recovery.
//!
//! The bars corpus lays a vocabulary of `side × side` words on a grid; each
//! true topic is uniform over one row or one column of the grid. Documents mix
//! topics with proportions drawn from a symmetric Dirichlet.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{build_vocabulary, encode_document_counted, Corpus, Vocabulary};
use crate::error::Result;
use crate::rng_from_seed;

/// Surface token for grid cell `(row, col)`.
pub fn grid_token(row: usize, col: usize) -> String {
    format!("r{row}c{col}")
}

/// Grid tokens of true topic `t`: rows come first, then columns.
pub fn bar_tokens(side: usize, t: usize) -> Vec<String> {
    if t < side {
        (0..side).map(|c| grid_token(t, c)).collect()
    } else {
        (0..side).map(|r| grid_token(r, t - side)).collect()
    }
}

/// Draws from a symmetric Dirichlet via normalized Gamma variates.
pub fn sample_dirichlet(k: usize, alpha: f64, rng: &mut crate::Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    let mut x: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        x = vec![1.0 / k as f64; k];
    }
    x
}

/// Documents as whitespace-joined grid tokens, one per entry.
pub fn bars_lines(side: usize, num_docs: usize, doc_len: usize, alpha: f64, seed: u64) -> Vec<String> {
    let mut rng = rng_from_seed(seed);
    let num_topics = 2 * side;
    (0..num_docs)
        .map(|_| {
            let theta = sample_dirichlet(num_topics, alpha, &mut rng);
            (0..doc_len)
                .map(|_| {
                    let mut u = rng.random::<f64>();
                    let mut t = num_topics - 1;
                    for (k, &p) in theta.iter().enumerate() {
                        if u < p {
                            t = k;
                            break;
                        }
                        u -= p;
                    }
                    let cell = rng.random_range(0..side);
                    if t < side {
                        grid_token(t, cell)
                    } else {
                        grid_token(cell, t - side)
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// True topic-word distributions over `vocab` ids.
pub fn bars_topics(side: usize, vocab: &Vocabulary) -> Vec<Vec<f64>> {
    (0..2 * side)
        .map(|t| {
            let mut row = vec![0.0; vocab.len()];
            for tok in bar_tokens(side, t) {
                if let Some(id) = vocab.id(&tok) {
                    row[id as usize] = 1.0 / side as f64;
                }
            }
            row
        })
        .collect()
}

/// A generated bars corpus with its ground truth.
#[derive(Debug, Clone)]
pub struct BarsData {
    pub side: usize,
    pub corpus: Corpus,
    pub topics: Vec<Vec<f64>>,
    /// Extra documents from the same process, not part of `corpus`.
    pub held_out: Corpus,
}

pub fn bars(side: usize, num_docs: usize, num_held_out: usize, doc_len: usize, alpha: f64, seed: u64) -> Result<BarsData> {
    let lines = bars_lines(side, num_docs + num_held_out, doc_len, alpha, seed);
    let (train, held) = lines.split_at(num_docs);
    let vocab = build_vocabulary(train, 1, None)?;
    let encode = |lines: &[String], offset: usize| -> Result<Corpus> {
        let docs = lines
            .iter()
            .enumerate()
            .map(|(i, l)| encode_document_counted(&format!("doc{}", i + offset), l, &vocab, &[]).map(|(d, _)| d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            docs,
            vocab: vocab.clone(),
        })
    };
    let corpus = encode(train, 0)?;
    let held_out = encode(held, num_docs)?;
    let topics = bars_topics(side, &vocab);
    Ok(BarsData {
        side,
        corpus,
        topics,
        held_out,
    })
}

/// Greedily pairs recovered rows with true rows by smallest L1 distance.
/// Returns `(recovered, truth, l1)` triples in matching order.
pub fn greedy_match(recovered: &[Vec<f64>], truth: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, r) in recovered.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let l1 = r.iter().zip(t).map(|(a, b)| (a - b).abs()).sum();
            pairs.push((i, j, l1));
        }
    }
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_r = vec![false; recovered.len()];
    let mut used_t = vec![false; truth.len()];
    let mut out = Vec::new();
    for (i, j, d) in pairs {
        if !used_r[i] && !used_t[j] {
            used_r[i] = true;
            used_t[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

pub fn mean_matched_l1(recovered: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let m = greedy_match(recovered, truth);
    m.iter().map(|p| p.2).sum::<f64>() / m.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bars_shape() {
        let b = bars(5, 30, 4, 20, 1.0, 1).unwrap();
        assert_eq!(b.corpus.docs.len(), 30);
        assert_eq!(b.held_out.docs.len(), 4);
        assert!(b.corpus.vocab.len() <= 25);
        assert_eq!(b.topics.len(), 10);
        for t in &b.topics {
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12 || b.corpus.vocab.len() < 25);
        }
    }

    #[test]
    fn greedy_match_identity() {
        let truth = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let rec = vec![vec![0.1, 0.9], vec![0.8, 0.2]];
        let m = greedy_match(&rec, &truth);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].0, m[0].1), (0, 1));
        assert!((mean_matched_l1(&rec, &truth) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut rng = rng_from_seed(3);
        let x = sample_dirichlet(6, 0.3, &mut rng);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
