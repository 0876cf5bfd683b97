//! Deterministic RNG substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! `(seed, domain, index)`, so independent drops can be evaluated in any
//! order (or concurrently) and still reproduce bit-for-bit.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a keystream.
pub mod domain {
    pub const GEOMETRY: u64 = 1;
    pub const KNOWN_SHADOWING: u64 = 2;
    pub const PILOTS: u64 = 3;
    pub const FIT_DROPS: u64 = 4;
    pub const VALIDATION_DROPS: u64 = 5;
    pub const ORACLE: u64 = 6;
}

/// RNG for the `index`-th unit of work in `domain`.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix(seed ^ splitmix(domain));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
