//! Seed-derived random streams.
//!
//! Every randomized component draws from a ChaCha8 stream keyed by the user
//! seed and addressed by `(domain, index)`. ChaCha is counter based, so any
//! stream can be opened independently of the others and the output of a
//! parallel computation does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Logical consumers of randomness. Distinct domains never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Dual = 1,
    BootstrapX = 2,
    BootstrapY = 3,
    Permutation = 4,
    DataX = 5,
    DataY = 6,
    Reference = 7,
    Misc = 8,
}

const INDEX_BITS: u32 = 40;

/// Opens stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    debug_assert!(index < (1 << INDEX_BITS));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << INDEX_BITS) | index);
    rng
}
