//! Per-cell seed derivation.
//!
//! Every random stream in a sweep is seeded from the master seed, a stream
//! tag and up to three ids, folded through the SplitMix64 finalizer. A cell
//! can therefore be re-run on its own, and the worker schedule never affects
//! which numbers a cell sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Leadfield = 1,
    Model = 2,
    Location = 3,
    Noise = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, ids: [u64; 3]) -> u64 {
    let mut acc = splitmix64(master);
    for v in std::iter::once(stream as u64).chain(ids) {
        acc = splitmix64(acc ^ v);
    }
    acc
}

pub fn stream_rng(master: u64, stream: Stream, ids: [u64; 3]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, ids))
}
