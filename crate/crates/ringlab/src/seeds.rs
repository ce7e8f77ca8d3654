//! Named sub-stream seeding: every random consumer derives its own stream
//! from one master seed, so components can be re-seeded independently and
//! experiment re-runs are bit-identical.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a deterministic 64-bit seed for stream (`name`, `index`).
pub fn derive_seed(master: u64, name: &str, index: u64) -> u64 {
    splitmix(master ^ splitmix(fnv1a(name.as_bytes())) ^ splitmix(index))
}

/// Deterministic RNG for the named sub-stream of a master seed.
pub fn substream(master: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, name, index))
}
