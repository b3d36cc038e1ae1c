//! Per-image seed derivation.
//!
//! `derive_seed` hashes the canonical byte encoding
//!
//! ```text
//! global_seed   u64 little-endian (8 bytes)
//! id_len        u64 little-endian (8 bytes), byte length of image_id
//! image_id      UTF-8 bytes
//! kind          u8, position of the kind in `CorruptionKind::ALL`
//! severity      u8
//! ```
//!
//! with 64-bit FNV-1a (offset basis `0xcbf29ce484222325`, prime
//! `0x100000001b3`) and passes the digest through the SplitMix64 finalizer
//! so that nearby inputs give well-spread seeds. The length prefix keeps
//! `""` and `"0"` (or any prefix pair) apart.

use super::rng::splitmix64_mix;
use super::CorruptionKind;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(hash, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn derive_seed(global_seed: u64, image_id: &str, kind: CorruptionKind, severity: u8) -> u64 {
    let mut h = FNV_OFFSET;
    h = fnv1a(h, &global_seed.to_le_bytes());
    h = fnv1a(h, &(image_id.len() as u64).to_le_bytes());
    h = fnv1a(h, image_id.as_bytes());
    h = fnv1a(h, &[kind.index() as u8, severity]);
    splitmix64_mix(h)
}
