//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha stream identified by
//! `(seed, stream)`. Replication `k` of a study uses the seed
//! `derive_seed(seed, k)`, so no generator is ever shared between tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Stream ids for the different consumers of randomness.
pub mod streams {
    pub const SAMPLE: u64 = 1;
    pub const STARTS: u64 = 2;
    pub const ASYMPTOTICS: u64 = 3;
}

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for task `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}
