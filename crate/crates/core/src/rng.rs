//! Counter-based seeding so that every (purpose, index) pair gets its own
//! reproducible stream regardless of scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_FLUX: u64 = 0x01;
pub(crate) const TAG_COEFF: u64 = 0x02;
pub(crate) const TAG_OBS: u64 = 0x03;
pub(crate) const TAG_NOISE: u64 = 0x04;
pub(crate) const TAG_SPLIT: u64 = 0x05;
pub(crate) const TAG_GRAPH: u64 = 0x06;
pub(crate) const TAG_INIT: u64 = 0x07;
pub(crate) const TAG_DROPOUT: u64 = 0x08;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

/// Independent stream for `(seed, tag, index)`.
pub(crate) fn substream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}

/// Two-level index, e.g. (variable, sample).
pub(crate) fn substream2(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, tag, a), tag, b))
}
