//! Reproducible random streams.
//!
//! Every trajectory or ensemble member draws from its own ChaCha stream keyed by
//! `(master_seed, purpose, index)`, so results do not depend on how work is scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Tags separating the uses of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Initial,
    Dynamics,
    Sampler,
    Control,
    Auxiliary(u32),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Initial => 1,
            Purpose::Dynamics => 2,
            Purpose::Sampler => 3,
            Purpose::Control => 4,
            Purpose::Auxiliary(k) => 0x100 + k as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(master_seed, purpose, index)`.
pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let key = splitmix64(master_seed ^ splitmix64(purpose.code()));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
