//! Named random sub-streams derived from one master seed.
//!
//! Each consumer owns its own ChaCha stream, so adding draws in one place
//! (say, network jitter) never shifts the traffic or disturbance sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Traffic,
    Disturbance,
    Network,
    Jitter,
}

impl Stream {
    fn index(self) -> u64 {
        match self {
            Stream::Traffic => 1,
            Stream::Disturbance => 2,
            Stream::Network => 3,
            Stream::Jitter => 4,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.index());
    rng
}

#[derive(Debug, Clone)]
pub struct Streams {
    pub traffic: ChaCha8Rng,
    pub disturbance: ChaCha8Rng,
    pub network: ChaCha8Rng,
    pub jitter: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            traffic: stream(seed, Stream::Traffic),
            disturbance: stream(seed, Stream::Disturbance),
            network: stream(seed, Stream::Network),
            jitter: stream(seed, Stream::Jitter),
        }
    }
}
