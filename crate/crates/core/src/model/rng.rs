use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::NodeId;

/// Keyed coin source. Every `(node, step)` pair owns an independent ChaCha
/// stream position, so the outcome of a node's coin never depends on which
/// other nodes were scheduled or in which order moves were processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    master_seed: u64,
}

impl RandomStream {
    pub fn new(master_seed: u64) -> Self {
        RandomStream { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&self, node: NodeId, step: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(node as u64);
        rng.set_word_pos(u128::from(step) * 2);
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `Rand(p)`: true with probability `p`. `p >= 1` is always true.
    pub fn bernoulli(&self, node: NodeId, step: u64, p: f64) -> bool {
        self.uniform(node, step) < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depends_only_on_key() {
        let a = RandomStream::new(7);
        let b = RandomStream::new(7);
        // Query order does not matter.
        let fwd: Vec<f64> = (0..20).map(|k| a.uniform(k % 5, k as u64 / 5)).collect();
        let rev: Vec<f64> = (0..20)
            .rev()
            .map(|k| b.uniform(k % 5, k as u64 / 5))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        assert_eq!(fwd, rev);
        assert_ne!(a.uniform(0, 0), RandomStream::new(8).uniform(0, 0));
        assert_ne!(a.uniform(0, 0), a.uniform(1, 0));
        assert_ne!(a.uniform(0, 0), a.uniform(0, 1));
    }

    #[test]
    fn certain_coin() {
        let r = RandomStream::new(1);
        assert!((0..1000).all(|s| r.bernoulli(3, s, 1.0)));
        assert!((0..1000).all(|s| !r.bernoulli(3, s, 0.0)));
    }

    #[test]
    fn fair_coin_is_roughly_fair() {
        let r = RandomStream::new(42);
        let heads = (0..20_000).filter(|&s| r.bernoulli(0, s, 0.5)).count();
        // 6 sigma of Binomial(20000, 1/2) is about 424.
        assert!((heads as i64 - 10_000).abs() < 424, "heads = {heads}");
    }
}
