//! Purpose-keyed deterministic randomness.
//!
//! Every random decision in the pipeline draws from a stream derived from
//! `(root seed, purpose tags)`. Streams are stateless: the same key always
//! yields the same stream, no matter what was drawn elsewhere or in which
//! order stages ran. This is what makes interrupted runs resumable and
//! different pipeline configurations comparable on common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche, cheap, stable across platforms.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of purpose tags into a derived seed.
pub fn derive_seed(seed: u64, tags: &[&str]) -> u64 {
    let mut h = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    for tag in tags {
        for chunk in tag.as_bytes().chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            h = splitmix64(h ^ u64::from_le_bytes(buf));
        }
        // Separator so ["ab","c"] and ["a","bc"] key different streams.
        h = splitmix64(h ^ 0xFF51_AFD7_ED55_8CCD);
    }
    h
}

/// A fresh deterministic stream for the given purpose.
pub fn stream(seed: u64, tags: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// One uniform draw in `[0, 1)` keyed by purpose. Used for per-instance
/// coin flips that must stay identical across iterations and sweeps.
pub fn unit(seed: u64, tags: &[&str]) -> f64 {
    // 53 mantissa bits of the derived seed, the standard u64 -> f64 trick.
    (derive_seed(seed, tags) >> 11) as f64 / (1u64 << 53) as f64
}
