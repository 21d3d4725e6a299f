//! Seed management.
//!
//! Every trial owns a single 64-bit seed. Each consumer of randomness draws
//! from its own ChaCha8 stream keyed by that seed, so changing how much one
//! consumer draws never perturbs another. Two architectures run under the same
//! trial seed therefore see the same sensor layout, insect trajectory, noise
//! and filter matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams derived from one trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sensors = 0,
    Insect = 1,
    Noise = 2,
    Permutation = 3,
    Filters = 4,
    Cumulants = 5,
    Neighborhoods = 6,
    Policy = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Trial `i` of an experiment uses `base_seed + i`.
pub fn trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    base_seed.wrapping_add(trial_index)
}

/// Serializable position of a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
