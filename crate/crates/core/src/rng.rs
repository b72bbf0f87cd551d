//! Seed derivation for reproducible, independently addressable trials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(grid point, trial)` under a master seed. Counter-based, so any
/// cell can be regenerated without replaying the others.
pub fn derive_seed(master: u64, grid_index: u64, trial_index: u64) -> u64 {
    splitmix64(master ^ splitmix64(splitmix64(grid_index) ^ trial_index.rotate_left(32)))
}

pub fn seeded(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(master: u64, grid_index: u64, trial_index: u64) -> TrialRng {
    seeded(derive_seed(master, grid_index, trial_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let mut seen = HashSet::new();
        for g in 0..50 {
            for t in 0..50 {
                assert!(seen.insert(derive_seed(7, g, t)));
            }
        }
        assert_eq!(derive_seed(7, 3, 4), derive_seed(7, 3, 4));
        assert_ne!(derive_seed(7, 3, 4), derive_seed(8, 3, 4));
    }
}
