//! Seeded hashing used by deterministic mocks.

use sha2::{Digest, Sha256};

/// SHA-256 over the seed followed by each part, length-prefixed so that part
/// boundaries matter.
pub fn seeded_digest(seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

pub fn seeded_u64(seed: u64, parts: &[&[u8]]) -> u64 {
    let d = seeded_digest(seed, parts);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// An endless deterministic stream of u64s for a seed and key.
pub fn seeded_stream(seed: u64, key: &[u8]) -> impl Iterator<Item = u64> + '_ {
    (0u64..).flat_map(move |block| {
        let d = seeded_digest(seed, &[key, &block.to_le_bytes()]);
        (0..4).map(move |i| u64::from_le_bytes(d[i * 8..i * 8 + 8].try_into().expect("8 bytes")))
    })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
