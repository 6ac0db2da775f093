#![allow(dead_code)]

use prunekit::{ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A store of 1..=4 prunable tensors plus a non-prunable bias, with
/// standard-normal weights. With `ties`, values are drawn from a small
/// integer grid so magnitude ties are common.
pub fn random_store(seed: u64, ties: bool) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let n_tensors = rng.random_range(1..=4);
    for t in 0..n_tensors {
        let rows = rng.random_range(1..=12);
        let cols = rng.random_range(1..=12);
        let data = (0..rows * cols)
            .map(|_| {
                if ties {
                    rng.random_range(-4i32..=4) as f32 * 0.25
                } else {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    x as f32
                }
            })
            .collect();
        store.insert(format!("layer{t}.weight"), Tensor::new(vec![rows, cols], data).unwrap(), true);
    }
    let bias = (0..5).map(|i| i as f32 - 2.0).collect();
    store.insert("out.bias", Tensor::new(vec![5], bias).unwrap(), false);
    store
}

/// Zero set of a mask as flat prunable indices.
pub fn zero_set(mask: &prunekit::PruneMask) -> std::collections::BTreeSet<usize> {
    mask.flat_keep()
        .iter()
        .enumerate()
        .filter(|(_, k)| !**k)
        .map(|(i, _)| i)
        .collect()
}
