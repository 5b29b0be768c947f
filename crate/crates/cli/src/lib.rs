//! File formats, checkpoints, configuration and run manifests for the
//! `puncase` command line. The algorithms live in `puncase-core`; this crate
//! owns everything that touches the filesystem.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod formats;
pub mod manifest;

/// FNV-1a over a byte string; used for input hashing in manifests and the
/// vocabulary hash embedded in checkpoints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
