//! Seeded random streams.
//!
//! A stream is identified by `(seed, stream_id)`. The same pair always
//! replays the same draws; different stream ids select independent ChaCha
//! streams under one key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream id used for gradient noise.
pub const NOISE_STREAM: u64 = 0;
/// Stream id used for initial points.
pub const INIT_STREAM: u64 = 1;
/// Stream id used for random objective weights.
pub const WEIGHTS_STREAM: u64 = 2;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// `count` i.i.d. standard-normal samples.
    pub fn normal_draw(&mut self, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.fill_normal(&mut out);
        out
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.inner.sample(StandardNormal);
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }
}
