//! Stable content hashing and seed derivation.
//!
//! Everything that must be reproducible across runs and platforms goes through
//! SHA-256 rather than `std::hash`, whose output is not stable between releases.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// First eight bytes (little-endian) of the SHA-256 over length-prefixed parts.
pub fn stable_hash64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Per-stage seed derived from the global seed and the stage name. Kept to 63
/// bits so it survives TOML's signed integers.
pub fn derive_seed(global: u64, stage: &str) -> u64 {
    stable_hash64(&[&global.to_le_bytes(), stage.as_bytes()]) >> 1
}
