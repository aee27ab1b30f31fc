//! Seed derivation. Every random draw in the crate comes from a ChaCha stream
//! keyed by a base seed plus a path of stable identifiers, so results never
//! depend on call order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_path_sensitive() {
        let a: u64 = stream(7, &[1, 2]).gen();
        let b: u64 = stream(7, &[1, 2]).gen();
        let c: u64 = stream(7, &[2, 1]).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(hash_str("P01_01"), hash_str("P01_01"));
        assert_ne!(hash_str("P01_01"), hash_str("P01_02"));
    }
}
