//! Deterministic derivation of independent RNG streams from one master seed.
//!
//! Every stochastic component (workload, trace mapping, network init,
//! exploration, replay sampling) draws from its own stream so that, e.g.,
//! swapping the policy leaves the request stream untouched (common random
//! numbers across compared runs).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams off the master experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Workload,
    WarmupWorkload,
    TraceMapping,
    NetworkInit,
    Exploration,
    Replay,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Workload => 0x01,
            Stream::WarmupWorkload => 0x02,
            Stream::TraceMapping => 0x03,
            Stream::NetworkInit => 0x04,
            Stream::Exploration => 0x05,
            Stream::Replay => 0x06,
        }
    }
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives the sub-seed for `stream` from the master seed.
pub fn subseed(master: u64, stream: Stream) -> u64 {
    mix(master ^ mix(stream.tag()))
}

/// A seeded RNG for the given stream.
pub fn rng_for(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(master, stream))
}
