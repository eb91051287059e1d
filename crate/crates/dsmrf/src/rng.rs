//! Seed derivation and random streams.
//!
//! Every random stream is a ChaCha8 generator whose seed comes from
//! [`derive_seed`], so a global seed plus an index fully determines it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `(index + 1)`-th output of a SplitMix64 generator started at `seed`.
///
/// This is the external seed contract: stream `index` under global seed
/// `seed` is `ChaCha8Rng::seed_from_u64(derive_seed(seed, index))`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream(seed: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, index))
}

/// Child stream of `rng`; consumes one `u64` from it.
pub fn fork(rng: &mut Rng) -> Rng {
    use rand::RngCore;
    Rng::seed_from_u64(rng.next_u64())
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}
