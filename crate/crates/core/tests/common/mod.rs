//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nnq_core::generators::{random_lc_rbm, RandomRbmSpec};
use nnq_core::RbmModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Member `i` of the random locally consistent ensemble: `n = 3 + i mod 5`
/// (so `n ≤ 7`), `m = 1 + (i / 5) mod 5`, couplings with smallest magnitude
/// in `[0.2, 1]`, strengths at most 3, ferromagnetic for even `i`.
pub fn ensemble_model(i: usize) -> RbmModel {
    ensemble_model_with(i, 3 + i % 5)
}

pub fn ensemble_model_with(i: usize, n: usize) -> RbmModel {
    let spec = RandomRbmSpec { ferromagnetic: i % 2 == 0, ..RandomRbmSpec::new(n, 1 + (i / 5) % 5) };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + i as u64);
    random_lc_rbm(&spec, &mut rng).expect("ensemble spec is satisfiable")
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Every subset of `items` with at most `max` elements.
pub fn subsets_up_to(items: &[usize], max: usize) -> Vec<Vec<usize>> {
    (0..1usize << items.len())
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| items.iter().enumerate().filter(|(b, _)| m >> b & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}
