use rand::Rng;

use crate::error::{Error, Result};

/// Vose alias table: O(K) construction, O(1) draws.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("alias table needs at least one weight".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!("alias weights must be positive and finite, got {bad}")));
        }
        let n = weights.len();
        let sum: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / sum).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();

        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers differ from 1 only by rounding.
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn alias(&self) -> &[u32] {
        &self.alias
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let cell = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[cell] {
            cell
        } else {
            self.alias[cell] as usize
        }
    }

    /// Probability that a draw returns `k`, reconstructed from the table.
    pub fn mass(&self, k: usize) -> f64 {
        let n = self.prob.len() as f64;
        let own = self.prob[k];
        let borrowed: f64 = self
            .alias
            .iter()
            .zip(&self.prob)
            .enumerate()
            .filter(|&(j, (&a, _))| a as usize == k && j != k)
            .map(|(_, (_, &p))| 1.0 - p)
            .sum();
        (own + borrowed) / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use proptest::prelude::*;

    fn empirical(table: &AliasTable, draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut hist = vec![0usize; table.len()];
        for _ in 0..draws {
            hist[table.sample(&mut rng)] += 1;
        }
        hist.into_iter().map(|h| h as f64 / draws as f64).collect()
    }

    #[test]
    fn uniform_weights_fill_every_cell() {
        let t = AliasTable::new(&[2.0; 4]).unwrap();
        assert_eq!(t.prob(), [1.0; 4]);
    }

    #[test]
    fn single_weight_always_zero() {
        let t = AliasTable::new(&[0.3]).unwrap();
        let mut rng = rng_from_seed(1);
        assert!((0..1000).all(|_| t.sample(&mut rng) == 0));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AliasTable::new(&[1.0, 0.0]).is_err());
        assert!(AliasTable::new(&[1.0, f64::NAN]).is_err());
        assert!(AliasTable::new(&[1.0, f64::INFINITY]).is_err());
        assert!(AliasTable::new(&[]).is_err());
    }

    #[test]
    fn one_to_three_frequencies() {
        let t = AliasTable::new(&[1.0, 3.0]).unwrap();
        let f = empirical(&t, 1_000_000, 42);
        assert!((f[0] - 0.25).abs() < 0.005, "{f:?}");
        assert!((f[1] - 0.75).abs() < 0.005, "{f:?}");
    }

    proptest! {
        #[test]
        fn table_reproduces_weights(weights in prop::collection::vec(1e-3f64..100.0, 1..40)) {
            let t = AliasTable::new(&weights).unwrap();
            let sum: f64 = weights.iter().sum();
            for (k, w) in weights.iter().enumerate() {
                prop_assert!((t.mass(k) - w / sum).abs() < 1e-12);
            }
            prop_assert!(t.prob().iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
