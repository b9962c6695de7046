//! Deterministic seeding.
//!
//! Every random stream in an experiment is derived from the master seed, the
//! replication index and a stage tag. Two different `(rep, tag)` pairs never
//! share a stream, and the mapping does not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stage tags. Each pipeline stage draws from its own stream.
pub mod stage {
    pub const ENV: &str = "env";
    pub const COLLECT: &str = "collect";
    pub const TEST: &str = "test";
    pub const BOOTSTRAP: &str = "bootstrap";
    pub const POLICY: &str = "policy";
    pub const CHECK: &str = "check";
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a, stable across platforms and toolchains.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Child seed for `(master, rep, tag)`.
pub fn child_seed(master: u64, rep: u64, tag: &str) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ splitmix64(rep.wrapping_add(0x5851_F42D_4C95_7F2D)));
    splitmix64(b ^ tag_hash(tag))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn child_rng(master: u64, rep: u64, tag: &str) -> Rng {
    rng_from_seed(child_seed(master, rep, tag))
}
