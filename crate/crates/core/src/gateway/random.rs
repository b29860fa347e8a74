use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GatewayError, LogitsProvider};
use crate::constrain::tokenizer::TokenId;

/// Pseudo-random logits, uniform on [-1, 1), a pure function of
/// (seed, context).
#[derive(Debug, Clone)]
pub struct RandomProvider {
    seed: u64,
    vocab_size: usize,
}

impl RandomProvider {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        Self { seed, vocab_size }
    }

    fn stream_seed(&self, context: &[TokenId]) -> u64 {
        // splitmix64 folded over the context
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for &t in std::iter::once(&(context.len() as TokenId)).chain(context) {
            h = h.wrapping_add(u64::from(t)).wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = h;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            h = z ^ (z >> 31);
        }
        h
    }
}

impl LogitsProvider for RandomProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<Vec<f32>, GatewayError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.stream_seed(context));
        Ok((0..self.vocab_size).map(|_| rng.random_range(-1.0f32..1.0)).collect())
    }
}
