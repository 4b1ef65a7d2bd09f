//! Counter-based random streams.
//!
//! Every Monte Carlo sample is drawn from its own ChaCha stream selected by
//! the sample index, so a sample's value depends only on `(seed, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for sample `index` under `seed`.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent seed for a sub-computation labelled `tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
