//! Stable seed derivation.
//!
//! Every random stream is keyed by `(base_seed, ic_index, stream)`, hashed
//! with SHA-256, so results never depend on scheduling order or on which
//! parameter instance is running.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const STREAM_SHUFFLE: &str = "shuffle";
pub const STREAM_TRAIN_NOISE: &str = "train-noise";
pub const STREAM_EXTRAP_NOISE: &str = "extrap-noise";
pub const STREAM_MODEL: &str = "model";

pub fn derive_seed(base_seed: u64, ic_index: u64, stream: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update(ic_index.to_le_bytes());
    hasher.update((stream.len() as u64).to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
