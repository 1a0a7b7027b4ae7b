//! Counter-based seeding.
//!
//! Every random stream in the crate is a ChaCha8 generator whose 64-bit seed
//! is derived from `(root seed, purpose string, index)`:
//!
//! ```text
//! h = FNV-1a-64(purpose bytes)
//! s = splitmix64(root ^ splitmix64(h ^ splitmix64(index)))
//! ```
//!
//! Replicate `i` of any resampling loop therefore draws the same numbers no
//! matter which thread evaluates it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn derive_seed(root: u64, purpose: &str, index: u64) -> u64 {
    let h = fnv1a(purpose.as_bytes());
    splitmix64(root ^ splitmix64(h ^ splitmix64(index)))
}

pub fn stream(root: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, purpose, index))
}
