use crate::error::{Error, Result};

use super::TopicModelParams;

/// Unnormalized collapsed-Gibbs weights for one token of word `w`:
/// `(n_dk + α)(n_kw + β) / (n_k + Vβ)`.
///
/// All counts must exclude the token being resampled. `word_counts[k]` is
/// `n_kw` for the token's word.
pub fn lda_conditional(
    params: &TopicModelParams,
    vocab_size: usize,
    doc_counts: &[u32],
    word_counts: &[u32],
    topic_totals: &[u64],
    weights: &mut [f64],
) {
    let vbeta = vocab_size as f64 * params.beta;
    for k in 0..weights.len() {
        weights[k] = (f64::from(doc_counts[k]) + params.alpha) * (f64::from(word_counts[k]) + params.beta)
            / (topic_totals[k] as f64 + vbeta);
    }
}

/// Log-space weights for assigning a whole sentence to one topic.
///
/// `word_topic` is the word-major `V × K` count table; all counts exclude the
/// sentence. Repeated words contribute rising factors `n_kw + β + j`, and the
/// denominator rises by one per token.
pub fn slda_conditional(
    params: &TopicModelParams,
    vocab_size: usize,
    doc_counts: &[u32],
    sentence: &[u32],
    word_topic: &[u32],
    topic_totals: &[u64],
    log_weights: &mut [f64],
) -> Result<()> {
    if sentence.is_empty() {
        return Err(Error::EmptySentence);
    }
    let k_count = log_weights.len();
    let vbeta = vocab_size as f64 * params.beta;
    let mut words = sentence.to_vec();
    words.sort_unstable();

    for (k, lw) in log_weights.iter_mut().enumerate() {
        *lw = (f64::from(doc_counts[k]) + params.alpha).ln();
    }
    let mut run_start = 0;
    while run_start < words.len() {
        let w = words[run_start];
        let run_end = run_start + words[run_start..].iter().take_while(|&&x| x == w).count();
        let row = &word_topic[w as usize * k_count..(w as usize + 1) * k_count];
        for (k, lw) in log_weights.iter_mut().enumerate() {
            let base = f64::from(row[k]) + params.beta;
            for j in 0..run_end - run_start {
                *lw += (base + j as f64).ln();
            }
        }
        run_start = run_end;
    }
    for (k, lw) in log_weights.iter_mut().enumerate() {
        let base = topic_totals[k] as f64 + vbeta;
        for i in 0..sentence.len() {
            *lw -= (base + i as f64).ln();
        }
    }
    Ok(())
}

/// Normalizes positive weights in place.
pub fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
}

/// Turns log-weights into a normalized distribution in place.
pub fn normalize_log(log_weights: &mut [f64]) {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    log_weights.iter_mut().for_each(|w| *w = (*w - max).exp());
    normalize(log_weights);
}
