//! Counter-based seed derivation. Replicates, pilot rounds and generation
//! streams all derive independent sub-seeds from one master seed, so results
//! do not depend on thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the sub-seed for (`lane`, `counter`) from a master seed.
pub fn derive_seed(master: u64, lane: u64, counter: u64) -> u64 {
    let a = mix(master ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(lane.wrapping_add(1)));
    mix(a ^ 0x6a09_e667_f3bc_c909u64.wrapping_mul(counter.wrapping_add(1)))
}

/// The generator used throughout: counter-based, cheap to seed per call.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
