//! Deterministic seed splitting: every worker derives its own stream from
//! the master seed and its index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `master`.
pub fn child(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Child seed two levels down, e.g. (experiment point, replication).
pub fn grandchild(master: u64, i: u64, j: u64) -> u64 {
    child(child(master, i), j)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn children_differ_and_repeat() {
        let a: Vec<u64> = (0..100).map(|i| child(7, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| child(7, i)).collect();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert_ne!(child(7, 0), child(8, 0));
        assert_eq!(rng(5).random::<u64>(), rng(5).random::<u64>());
    }
}
