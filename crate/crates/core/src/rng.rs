//! Keyed random streams.
//!
//! Every consumer of randomness derives its own generator from the master
//! seed plus a fixed key path (tree index, attribute index, fold, ...), so the
//! numbers a unit of work sees never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a key path into a single 64-bit seed.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Generator for the stream identified by `(seed, key...)`.
pub fn stream(seed: u64, key: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}

// Domain tags keep streams for different purposes disjoint.
pub(crate) const TAG_TREE: u64 = 0x7472_6565;
pub(crate) const TAG_PERMUTE: u64 = 0x7065_726d;
pub(crate) const TAG_RELIEF: u64 = 0x7265_6c66;
pub(crate) const TAG_FOLDS: u64 = 0x666f_6c64;
pub(crate) const TAG_KMEANS: u64 = 0x6b6d_6e73;
pub(crate) const TAG_SYNTH: u64 = 0x7379_6e74;
