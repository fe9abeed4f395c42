//! Topic modeling toolkit.
//!
//! Semantic representation: LDA and SentenceLDA trained by collapsed Gibbs
//! sampling, inference by Gibbs or alias-table Metropolis-Hastings, and
//! topical word embeddings. Semantic matching: entropy, cosine, short-long
//! generative similarity, embedding keyword scores, Hellinger distance and
//! Jensen-Shannon divergence. Plus a feature-based matrix factorization model
//! that can take topic distances as global features.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod model_store;
pub mod sampler;
pub mod semantics;
pub mod svdfeature;
pub mod synthetic;
pub mod twe;

pub use error::{Error, Result};

/// Seedable generator used everywhere randomness is needed. ChaCha8 output is
/// specified independently of platform and word size.
pub type Rng = rand_chacha::ChaCha8Rng;

pub(crate) fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
