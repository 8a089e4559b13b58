//! Seeded randomness.
//!
//! Every stochastic step draws from a Xoshiro256++ generator whose state is
//! expanded from a single `u64` seed with SplitMix64. Streams are
//! reproducible within this crate version; bit compatibility with other
//! implementations is not promised.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SearchRng = Xoshiro256PlusPlus;

pub fn seeded_rng(seed: u64) -> SearchRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}
