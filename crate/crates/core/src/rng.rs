//! Seed splitting.
//!
//! Every random decision in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, purpose, index)`: the 64-bit seed expands to the ChaCha key and the
//! stream id (nonce) is `purpose << 56 | index`. ChaCha is counter-based, so
//! two streams with different `(purpose, index)` never overlap and a stream can
//! be recreated at any time from its coordinates alone. This is what lets the
//! runs on `S` and on `S_i` consume the very same coordinate draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Coordinates = 1,
    Pairs = 2,
    Perturbation = 3,
    Split = 4,
    Synthetic = 5,
    PairSampling = 6,
    SmoothnessSampling = 7,
    Checks = 8,
}

const INDEX_MASK: u64 = (1 << 56) - 1;

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & INDEX_MASK));
    rng
}

/// Child seed for repetition `index` of an experiment driven by `master`.
///
/// SplitMix64 finalizer over `master + (index + 1) * golden`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
