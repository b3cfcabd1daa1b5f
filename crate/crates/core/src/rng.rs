//! Deterministic random number streams.
//!
//! A run owns a single master seed. Every consumer of randomness gets its own
//! ChaCha stream derived from (seed, subsystem, agent), so adding randomness
//! to one subsystem never perturbs draws made by another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Subsystems with their own random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Odometry drift accumulation.
    Drift,
    /// Range noise on lidar sweeps.
    Sensor,
    /// Artefact detection Bernoulli trials, measurement noise, posteriors.
    Detection,
    /// Scenario-level draws (e.g. randomized test harnesses).
    Harness,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Drift => 1,
            Stream::Sensor => 2,
            Stream::Detection => 3,
            Stream::Harness => 4,
        }
    }
}

/// Returns the random stream for (seed, subsystem, agent index).
pub fn substream(seed: u64, stream: Stream, agent: u16) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((agent as u64) << 8) | stream.id());
    rng
}
