//! Counter-based random streams.
//!
//! Every draw in a run is addressed by `(seed, purpose, iteration, counter)`.
//! The seed keys a ChaCha8 generator, `(purpose, iteration)` selects the
//! stream and the counter selects a disjoint block range within it, so the
//! values a worker sees do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per counter: 2^20 u32 draws.
const WORDS_PER_COUNTER: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Proposal = 1,
    Simulation = 2,
    Chain = 3,
    Fit = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub iteration: u32,
}

impl RngStream {
    pub fn new(seed: u64, iteration: u32) -> Self {
        Self { seed, iteration }
    }

    pub fn rng(&self, purpose: Purpose, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 32) | self.iteration as u64);
        rng.set_word_pos(counter as u128 * WORDS_PER_COUNTER);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(7, 2);
        let a: u64 = s.rng(Purpose::Simulation, 5).random();
        let b: u64 = s.rng(Purpose::Simulation, 5).random();
        let c: u64 = s.rng(Purpose::Simulation, 6).random();
        let d: u64 = s.rng(Purpose::Proposal, 5).random();
        let e: u64 = RngStream::new(7, 3).rng(Purpose::Simulation, 5).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }
}
