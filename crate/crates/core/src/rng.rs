//! Seeded random streams.
//!
//! Every stochastic routine takes a base seed and derives an independent
//! ChaCha stream per task index, so results do not depend on the order in
//! which parallel tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies which consumer a stream belongs to, so that the same
/// `(seed, index)` pair never yields correlated draws in two subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    LabelPermutation = 1,
    PValueShuffle = 2,
    Simulation = 3,
    MonteCarlo = 4,
    Generator = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for task `(outer, inner)` of `domain` under `seed`.
pub fn substream(seed: u64, domain: Domain, outer: u64, inner: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(key ^ splitmix64(outer.wrapping_add(1))));
    rng.set_stream(inner);
    rng
}
