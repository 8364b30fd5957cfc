//! Seeded, named random streams.
//!
//! Each stream is a ChaCha20 generator keyed by the 64-bit seed with the
//! stream id selecting the ChaCha stream, so `(seed, stream)` fully determines
//! the output sequence on every platform. Gaussian samples use the ziggurat
//! sampler from `rand_distr`, one standard normal per coordinate in index
//! order, scaled by the requested standard deviation.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Purpose labels for the independent streams a training run consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamId {
    Subsample,
    Noise,
    Init,
    Data,
    Custom(u64),
}

impl StreamId {
    fn as_u64(self) -> u64 {
        match self {
            StreamId::Subsample => 1,
            StreamId::Noise => 2,
            StreamId::Init => 3,
            StreamId::Data => 4,
            StreamId::Custom(n) => 0x1000 + n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: StreamId,
    rng: ChaCha20Rng,
    gaussian_draws: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream.as_u64());
        Self {
            seed,
            stream,
            rng,
            gaussian_draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    /// Number of standard-normal samples drawn so far.
    pub fn gaussian_draws(&self) -> u64 {
        self.gaussian_draws
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.gaussian_draws += 1;
        self.rng.sample(StandardNormal)
    }

    /// Writes `std * N(0, 1)` into every slot of `out`. Always draws
    /// `out.len()` samples, even when `std == 0`.
    pub fn fill_gaussian(&mut self, out: &mut [f64], std: f64) {
        for o in out.iter_mut() {
            let z = self.standard_normal();
            *o = if std == 0.0 { 0.0 } else { std * z };
        }
    }
}

/// `len` i.i.d. draws from `N(0, std²)`.
pub fn gaussian_vector(len: usize, std: f64, rng: &mut RngStream) -> Vec<f64> {
    debug_assert!(std >= 0.0, "std must be non-negative");
    let mut out = vec![0.0; len];
    rng.fill_gaussian(&mut out, std);
    out
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
