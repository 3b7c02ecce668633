//! Counter-based random streams.
//!
//! Every random draw in a study comes from a ChaCha8 generator keyed by the
//! master seed, with the stream id derived from a path such as
//! `(n_index, replication, purpose)`. Results therefore do not depend on the
//! order in which replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purpose tags.
pub mod purpose {
    pub const COVARIATES: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const MONTE_CARLO: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of counters into one 64-bit stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Generator for `(master_seed, path)`.
pub fn stream_rng(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(path));
    rng
}
