//! Seed fan-out.
//!
//! Every stochastic component takes its own 64-bit seed. Child seeds are derived from a parent
//! seed and a textual label: the label is folded into the parent with FNV-1a, and the result is
//! passed through one SplitMix64 finalization round. Derivation is stable across platforms and
//! releases, so any module can be re-run in isolation from the master seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SeedRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One SplitMix64 output step for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and `label`.
pub fn derive(parent: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET ^ parent;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Derives a child seed keyed by an integer index.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(parent, label) ^ splitmix64(index))
}

pub fn rng(seed: u64) -> SeedRng {
    SeedRng::seed_from_u64(seed)
}
