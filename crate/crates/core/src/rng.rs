//! Seed derivation and the pinned random generator.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded through
//! [`SeedableRng::seed_from_u64`] with a 64-bit sub-seed. Sub-seeds are derived
//! from a parent seed by [`derive_seed`]:
//!
//! ```text
//! derive_seed(parent, tag, index) = splitmix64(splitmix64(parent ^ tag) + index)
//! ```
//!
//! where `splitmix64` is the finalizer of Steele et al.'s SplitMix64 applied to
//! `x + 0x9E3779B97F4A7C15`. Tags are fixed constants (see [`stream`]) so that
//! e.g. the noise stream of series 3 never collides with the burst stream of
//! series 3. Derivation chains: master seed -> series sub-seed -> component
//! stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Tags for the named sub-streams.
pub mod stream {
    pub const SERIES: u64 = 0x5345_5249_4553_0001;
    pub const SHAPE: u64 = 0x5348_4150_4500_0002;
    pub const BURST: u64 = 0x4255_5253_5400_0003;
    pub const NOISE: u64 = 0x4e4f_4953_4500_0004;
    pub const INIT: u64 = 0x494e_4954_0000_0005;
    pub const EPOCH: u64 = 0x4550_4f43_4800_0006;
    pub const TRAJECTORY: u64 = 0x5452_414a_0000_0007;
    pub const FORECAST: u64 = 0x464f_5245_4341_0008;
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ tag).wrapping_add(index))
}

pub fn stream_rng(parent: u64, tag: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(parent, tag, index))
}

/// Human-readable description recorded in provenance files.
pub const GENERATOR_DESCRIPTION: &str =
    "ChaCha8Rng (rand_chacha 0.9) via seed_from_u64; sub-seeds splitmix64(splitmix64(parent ^ tag) + index)";
