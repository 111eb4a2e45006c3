//! Deterministic random stream shared by every stochastic component.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded from a `u64` through
//! `SeedableRng::seed_from_u64`. Both the seed expansion and the ChaCha block
//! function are platform independent, so a given seed yields the same draw
//! sequence everywhere. Four primitives are exposed and nothing else in the
//! crate touches the generator directly:
//!
//! * [`RngStream::uniform`]: `f64` in `[0, 1)`
//! * [`RngStream::below`]: integer in `[0, k)`, sampled as `u64`
//! * [`RngStream::normal`]: standard normal (ziggurat, `rand_distr`)
//! * [`RngStream::shuffle`]: Fisher-Yates, walking from the back
//!
//! plus [`RngStream::next_seed`] for deriving child seeds.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, k)`. Panics when `k == 0`.
    pub fn below(&mut self, k: usize) -> usize {
        assert!(k > 0, "RngStream::below called with empty range");
        self.inner.random_range(0..k as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Raw 64-bit draw, used to hand out per-episode seeds.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.inner.get_seed(),
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn from_state(state: &RngState) -> Self {
        let mut inner = ChaCha8Rng::from_seed(state.seed);
        inner.set_stream(state.stream);
        inner.set_word_pos(state.word_pos);
        Self { inner }
    }
}

/// Exact generator position, enough to resume a stream bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}
