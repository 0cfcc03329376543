//! Keyed random streams.
//!
//! Every random draw in the crate comes from a stream identified by
//! `(seed, purpose, index)`. Streams with different keys are independent, so
//! the orderings MCPP samples can never depend on how many value/cost draws an
//! instance generator consumed, and no stream is ever keyed by report data.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn purpose_hash(purpose: &str) -> u64 {
    purpose
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Derives a 64-bit sub-seed from a key.
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut state = seed ^ purpose_hash(purpose).rotate_left(17);
    let a = splitmix64(&mut state);
    state ^= index.wrapping_mul(0xd6e8_feb8_6659_fd93);
    a ^ splitmix64(&mut state)
}

/// ChaCha8 stream for the given key. Portable and bit-reproducible.
pub fn stream(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut state = derive_seed(seed, purpose, index);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
