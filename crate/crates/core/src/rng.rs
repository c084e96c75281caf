//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! global seed, a purpose tag and up to two indices (client id, round). Streams
//! never share state, so the order in which clients run cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    ClientTrain = 2,
    Selection = 3,
    Metric = 4,
    Data = 5,
    Partition = 6,
    Oracle = 7,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Plain seeded generator.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream that is a pure function of `(seed, purpose, a, b)`.
pub fn derive(seed: u64, purpose: Stream, a: u64, b: u64) -> Rng {
    let mut key = [0u8; 32];
    let words = [
        splitmix64(seed),
        splitmix64(seed ^ splitmix64(purpose as u64)),
        splitmix64(a.wrapping_add(0x5851_F42D_4C95_7F2D)),
        splitmix64(b ^ 0x1405_7B7E_F767_814F),
    ];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
