//! Frozen-model inference. Only the document-local topic counts evolve; the
//! returned distribution averages `(n_dk + α) / (L + Kα)` over the sampling
//! sweeps that follow burn-in. For SentenceLDA models the unit is a sentence
//! and `L` is the sentence count.

use rand::Rng as _;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::{rng_from_seed, Rng};

use super::conditional::normalize_log;
use super::train::draw;
use super::{ModelKind, TopicDistribution, TopicModel};

/// Acceptance bookkeeping for Metropolis-Hastings inference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MhStats {
    pub word_proposals: u64,
    pub word_accepted: u64,
    pub doc_proposals: u64,
    pub doc_accepted: u64,
}

/// `π(new)·q(old) / (π(old)·q(new))`. Evaluated so that `q ≡ π` yields
/// exactly 1.
#[inline]
pub fn mh_accept_ratio(target_new: f64, target_old: f64, proposal_new: f64, proposal_old: f64) -> f64 {
    (target_new * proposal_old) / (target_old * proposal_new)
}

struct LocalState {
    // one topic per unit (token or sentence)
    topics: Vec<usize>,
    doc_counts: Vec<u32>,
    accum: Vec<f64>,
}

impl LocalState {
    fn init(units: usize, k: usize, rng: &mut Rng) -> Self {
        let mut doc_counts = vec![0u32; k];
        let topics = (0..units)
            .map(|_| {
                let t = rng.random_range(0..k);
                doc_counts[t] += 1;
                t
            })
            .collect();
        Self {
            topics,
            doc_counts,
            accum: vec![0.0; k],
        }
    }

    fn accumulate(&mut self, alpha: f64) {
        let k = self.doc_counts.len() as f64;
        let denom = self.topics.len() as f64 + k * alpha;
        for (a, &n) in self.accum.iter_mut().zip(&self.doc_counts) {
            *a += (f64::from(n) + alpha) / denom;
        }
    }

    fn finish(self, samples: usize) -> Result<TopicDistribution> {
        let p = self.accum.into_iter().map(|a| a / samples as f64).collect();
        TopicDistribution::from_weights(p)
    }
}

fn unit_count(model: &TopicModel, doc: &Document) -> usize {
    match model.kind() {
        ModelKind::Lda => doc.len(),
        ModelKind::SentenceLda => doc.num_sentences(),
    }
}

fn check_budget(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sampling sweep is required".into()));
    }
    Ok(())
}

/// `Σ_w ln phi(k, w)` over a sentence, for every `k`.
fn sentence_log_likelihood(model: &TopicModel, sentence: &[u32], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for &w in sentence {
        for (o, p) in out.iter_mut().zip(model.phi_column(w)) {
            *o += p.ln();
        }
    }
}

pub fn infer_gibbs(
    model: &TopicModel,
    doc: &Document,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<TopicDistribution> {
    model.check_document(doc)?;
    check_budget(samples)?;
    let k = model.num_topics();
    let alpha = model.params().alpha;
    let mut rng = rng_from_seed(seed);
    let mut state = LocalState::init(unit_count(model, doc), k, &mut rng);
    let mut weights = vec![0.0; k];

    let sentence_ll: Vec<Vec<f64>> = match model.kind() {
        ModelKind::Lda => Vec::new(),
        ModelKind::SentenceLda => doc
            .sentences()
            .map(|s| {
                let mut ll = vec![0.0; k];
                sentence_log_likelihood(model, s, &mut ll);
                ll
            })
            .collect(),
    };

    for sweep in 0..burn_in + samples {
        match model.kind() {
            ModelKind::Lda => {
                for (i, &w) in doc.token_ids().iter().enumerate() {
                    let old = state.topics[i];
                    state.doc_counts[old] -= 1;
                    for ((wt, &n), &p) in weights.iter_mut().zip(&state.doc_counts).zip(model.phi_column(w)) {
                        *wt = (f64::from(n) + alpha) * p;
                    }
                    let new = draw(&weights, &mut rng);
                    state.doc_counts[new] += 1;
                    state.topics[i] = new;
                }
            }
            ModelKind::SentenceLda => {
                for (s, ll) in sentence_ll.iter().enumerate() {
                    let old = state.topics[s];
                    state.doc_counts[old] -= 1;
                    for ((wt, &n), &l) in weights.iter_mut().zip(&state.doc_counts).zip(ll) {
                        *wt = (f64::from(n) + alpha).ln() + l;
                    }
                    normalize_log(&mut weights);
                    let new = draw(&weights, &mut rng);
                    state.doc_counts[new] += 1;
                    state.topics[s] = new;
                }
            }
        }
        if sweep >= burn_in {
            state.accumulate(alpha);
        }
    }
    state.finish(samples)
}

pub fn infer_mh(
    model: &TopicModel,
    doc: &Document,
    burn_in: usize,
    samples: usize,
    mh_steps: usize,
    seed: u64,
) -> Result<TopicDistribution> {
    infer_mh_with_stats(model, doc, burn_in, samples, mh_steps, seed).map(|(p, _)| p)
}

/// Draws a topic from `q_d(k) ∝ n_dk + α`, where `n_dk` excludes the unit at
/// `skip`: with probability `(L-1)/(L-1+Kα)` copy the topic of another unit,
/// otherwise pick uniformly.
#[inline]
fn doc_proposal(state: &LocalState, skip: usize, alpha: f64, rng: &mut Rng) -> usize {
    let others = state.topics.len() - 1;
    let k = state.doc_counts.len();
    let mass_counts = others as f64;
    let mass_prior = k as f64 * alpha;
    if others > 0 && rng.random::<f64>() * (mass_counts + mass_prior) < mass_counts {
        let mut j = rng.random_range(0..others);
        if j >= skip {
            j += 1;
        }
        state.topics[j]
    } else {
        rng.random_range(0..k)
    }
}

/// Metropolis-Hastings inference cycling a word proposal (`∝ phi(k, w)`,
/// drawn from the model's per-word alias tables) and a document proposal
/// (`∝ n_dk + α`). `mh_steps` proposals are made per unit per sweep,
/// alternating kinds starting with the word proposal.
pub fn infer_mh_with_stats(
    model: &TopicModel,
    doc: &Document,
    burn_in: usize,
    samples: usize,
    mh_steps: usize,
    seed: u64,
) -> Result<(TopicDistribution, MhStats)> {
    model.check_document(doc)?;
    check_budget(samples)?;
    if mh_steps == 0 {
        return Err(Error::InvalidParameter("mh_steps must be at least 1".into()));
    }
    let k = model.num_topics();
    let alpha = model.params().alpha;
    let tables = model.word_alias_tables();
    let mut rng = rng_from_seed(seed);
    let mut state = LocalState::init(unit_count(model, doc), k, &mut rng);
    let mut stats = MhStats::default();

    match model.kind() {
        ModelKind::Lda => {
            for sweep in 0..burn_in + samples {
                for (i, &w) in doc.token_ids().iter().enumerate() {
                    let mut cur = state.topics[i];
                    state.doc_counts[cur] -= 1;
                    let phi = model.phi_column(w);
                    for step in 0..mh_steps {
                        let target = |t: usize, counts: &[u32]| (f64::from(counts[t]) + alpha) * phi[t];
                        let word_step = step % 2 == 0;
                        let prop = if word_step {
                            tables[w as usize].sample(&mut rng)
                        } else {
                            doc_proposal(&state, i, alpha, &mut rng)
                        };
                        let (q_new, q_old) = if word_step {
                            (phi[prop], phi[cur])
                        } else {
                            (
                                f64::from(state.doc_counts[prop]) + alpha,
                                f64::from(state.doc_counts[cur]) + alpha,
                            )
                        };
                        let ratio = mh_accept_ratio(
                            target(prop, &state.doc_counts),
                            target(cur, &state.doc_counts),
                            q_new,
                            q_old,
                        );
                        let accept = ratio >= 1.0 || rng.random::<f64>() < ratio;
                        if word_step {
                            stats.word_proposals += 1;
                            stats.word_accepted += u64::from(accept);
                        } else {
                            stats.doc_proposals += 1;
                            stats.doc_accepted += u64::from(accept);
                        }
                        if accept {
                            cur = prop;
                        }
                    }
                    state.doc_counts[cur] += 1;
                    state.topics[i] = cur;
                }
                if sweep >= burn_in {
                    state.accumulate(alpha);
                }
            }
        }
        ModelKind::SentenceLda => {
            // Word proposal for a sentence: pick one of its tokens uniformly
            // and draw from that word's alias table, so
            // q(k) = mean over tokens of phi(k, w) / Σ_j phi(j, w).
            let phi_norm: Vec<f64> = (0..model.vocab_size() as u32)
                .map(|w| model.phi_column(w).iter().sum())
                .collect();
            let sentences: Vec<&[u32]> = doc.sentences().collect();
            let lls: Vec<Vec<f64>> = sentences
                .iter()
                .map(|s| {
                    let mut ll = vec![0.0; k];
                    sentence_log_likelihood(model, s, &mut ll);
                    ll
                })
                .collect();
            let word_q = |s: &[u32], t: usize| -> f64 {
                s.iter()
                    .map(|&w| model.phi(t, w) / phi_norm[w as usize])
                    .sum::<f64>()
                    / s.len() as f64
            };
            for sweep in 0..burn_in + samples {
                for (si, sentence) in sentences.iter().enumerate() {
                    let mut cur = state.topics[si];
                    state.doc_counts[cur] -= 1;
                    let ll = &lls[si];
                    for step in 0..mh_steps {
                        let log_target = |t: usize, counts: &[u32]| (f64::from(counts[t]) + alpha).ln() + ll[t];
                        let word_step = step % 2 == 0;
                        let prop = if word_step {
                            let w = sentence[rng.random_range(0..sentence.len())];
                            tables[w as usize].sample(&mut rng)
                        } else {
                            doc_proposal(&state, si, alpha, &mut rng)
                        };
                        let (lq_new, lq_old) = if word_step {
                            (word_q(sentence, prop).ln(), word_q(sentence, cur).ln())
                        } else {
                            (
                                (f64::from(state.doc_counts[prop]) + alpha).ln(),
                                (f64::from(state.doc_counts[cur]) + alpha).ln(),
                            )
                        };
                        let log_ratio = log_target(prop, &state.doc_counts) - log_target(cur, &state.doc_counts)
                            + lq_old
                            - lq_new;
                        let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
                        if word_step {
                            stats.word_proposals += 1;
                            stats.word_accepted += u64::from(accept);
                        } else {
                            stats.doc_proposals += 1;
                            stats.doc_accepted += u64::from(accept);
                        }
                        if accept {
                            cur = prop;
                        }
                    }
                    state.doc_counts[cur] += 1;
                    state.topics[si] = cur;
                }
                if sweep >= burn_in {
                    state.accumulate(alpha);
                }
            }
        }
    }
    Ok((state.finish(samples)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{TopicModelParams, WordTopicCounts};

    fn model(k: usize, v: usize, alpha: f64, beta: f64, counts: Vec<u32>, kind: ModelKind) -> TopicModel {
        let c = WordTopicCounts::from_word_major(k, v, counts).unwrap();
        TopicModel::new(TopicModelParams::new(k, alpha, beta).unwrap(), kind, c).unwrap()
    }

    fn doc(ids: Vec<u32>) -> Document {
        Document::single_sentence("d", ids).unwrap()
    }

    /// Exact posterior mean of `(n_dk + α)/(L + Kα)` by enumerating all `K^L`
    /// assignments under the frozen-phi joint
    /// `Π_i phi(z_i, w_i) · Π_k Γ(n_k + α)` (the remaining Dirichlet-multinomial
    /// factors are constant in z).
    fn enumerate_posterior(m: &TopicModel, words: &[u32]) -> Vec<f64> {
        let k = m.num_topics();
        let l = words.len();
        let alpha = m.params().alpha;
        let mut mean = vec![0.0; k];
        let mut z_total = 0.0;
        let configs = k.pow(l as u32);
        for c in 0..configs {
            let mut z = Vec::with_capacity(l);
            let mut x = c;
            for _ in 0..l {
                z.push(x % k);
                x /= k;
            }
            let mut counts = vec![0usize; k];
            let mut weight = 1.0;
            for (&t, &w) in z.iter().zip(words) {
                weight *= m.phi(t, w);
                // rising factorial Γ(n+α) relative to Γ(α)
                weight *= counts[t] as f64 + alpha;
                counts[t] += 1;
            }
            z_total += weight;
            for t in 0..k {
                mean[t] += weight * (counts[t] as f64 + alpha) / (l as f64 + k as f64 * alpha);
            }
        }
        mean.iter().map(|m| m / z_total).collect()
    }

    fn tv(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    fn tiny() -> TopicModel {
        model(2, 3, 0.5, 0.1, vec![8, 1, 1, 6, 3, 3], ModelKind::Lda)
    }

    #[test]
    fn single_topic_is_point_mass() {
        let m = model(1, 3, 0.5, 0.1, vec![3, 2, 5], ModelKind::Lda);
        let d = doc(vec![0, 2, 1]);
        assert_eq!(&*infer_gibbs(&m, &d, 5, 5, 1).unwrap(), &[1.0]);
        assert_eq!(&*infer_mh(&m, &d, 5, 5, 2, 1).unwrap(), &[1.0]);
    }

    #[test]
    fn exclusive_words_force_their_topic() {
        // words 0 and 1 only ever seen in topic 3, with a vanishing beta
        let mut counts = vec![0u32; 2 * 4 + 4];
        counts[3] = 50;
        counts[4 + 3] = 50;
        // word 2 fills topics 0..3 so none of them is empty
        counts[8] = 100;
        counts[9] = 100;
        counts[10] = 100;
        let m = model(4, 3, 0.1, 1e-12, counts, ModelKind::Lda);
        let d = doc(vec![0, 1, 0, 1, 1]);
        let l = 5.0;
        let floor = l / (l + 4.0 * 0.1);
        let p = infer_gibbs(&m, &d, 20, 50, 4).unwrap();
        assert!(p[3] >= floor - 1e-9, "{p:?}");
        let p = infer_mh(&m, &d, 20, 50, 2, 4).unwrap();
        assert!(p[3] >= floor - 1e-9, "{p:?}");
    }

    #[test]
    fn gibbs_matches_enumeration() {
        let m = tiny();
        let words = [0, 1];
        let exact = enumerate_posterior(&m, &words);
        let p = infer_gibbs(&m, &doc(words.to_vec()), 200, 800, 42).unwrap();
        assert!(tv(&p, &exact) < 0.02, "{p:?} vs {exact:?}");
    }

    #[test]
    fn mh_matches_enumeration() {
        let m = tiny();
        let words = [0, 1];
        let exact = enumerate_posterior(&m, &words);
        let p = infer_mh(&m, &doc(words.to_vec()), 200, 800, 2, 42).unwrap();
        assert!(tv(&p, &exact) < 0.03, "{p:?} vs {exact:?}");
    }

    #[test]
    fn doc_proposal_equal_to_target_always_accepts() {
        // single-word vocabulary: phi(k, w) = 1 for every k, so the target is
        // exactly the document proposal
        let m = model(3, 1, 0.7, 0.1, vec![4, 9, 2], ModelKind::Lda);
        let d = doc(vec![0; 6]);
        let (_, stats) = infer_mh_with_stats(&m, &d, 10, 10, 2, 5).unwrap();
        assert!(stats.doc_proposals > 0);
        assert_eq!(stats.doc_accepted, stats.doc_proposals);
        for &(a, b) in &[(0.3, 0.9), (1e-300, 7.0), (123.456, 0.001)] {
            assert_eq!(mh_accept_ratio(a, b, a, b), 1.0);
        }
    }

    #[test]
    fn sentence_model_inference_matches_enumeration() {
        // two one-word sentences behave like two tokens
        let m = model(2, 3, 0.5, 0.1, vec![8, 1, 1, 6, 3, 3], ModelKind::SentenceLda);
        let d = Document::new("d", vec![0, 1], vec![0, 1, 2]).unwrap();
        let exact = enumerate_posterior(&m, &[0, 1]);
        let g = infer_gibbs(&m, &d, 200, 2000, 9).unwrap();
        let h = infer_mh(&m, &d, 200, 2000, 2, 9).unwrap();
        assert!(tv(&g, &exact) < 0.02, "{g:?} vs {exact:?}");
        assert!(tv(&h, &exact) < 0.03, "{h:?} vs {exact:?}");
    }

    #[test]
    fn errors() {
        let m = tiny();
        let oob = doc(vec![0, 7]);
        assert!(matches!(infer_gibbs(&m, &oob, 1, 1, 1), Err(Error::OutOfRange { .. })));
        assert!(matches!(infer_mh(&m, &oob, 1, 1, 2, 1), Err(Error::OutOfRange { .. })));
        assert!(infer_gibbs(&m, &doc(vec![0]), 1, 0, 1).is_err());
        assert!(infer_mh(&m, &doc(vec![0]), 1, 1, 0, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = tiny();
        let d = doc(vec![0, 1, 2, 2, 1]);
        assert_eq!(infer_gibbs(&m, &d, 10, 10, 3).unwrap(), infer_gibbs(&m, &d, 10, 10, 3).unwrap());
        assert_eq!(infer_mh(&m, &d, 10, 10, 2, 3).unwrap(), infer_mh(&m, &d, 10, 10, 2, 3).unwrap());
    }
}
