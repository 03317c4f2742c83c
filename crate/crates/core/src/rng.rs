//! Seed derivation. Every random stream in the crate is a ChaCha8 generator seeded from a `u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a parent seed and a path of counters.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(parent);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// Repetition sub-seed: master XOR splitmix of (grid index, repetition index).
pub fn repetition_seed(master: u64, n_index: usize, repetition: usize) -> u64 {
    master ^ splitmix64(((n_index as u64) << 32) ^ (repetition as u64).wrapping_add(1))
}
