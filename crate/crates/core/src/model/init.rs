use rand::Rng;

use super::config::ModelConfig;
use super::store::{NamedTensorStore, Tensor};
use crate::seed;

/// A store with every tensor `config` requires, filled from a seeded
/// generator: linear and embedding weights uniform in `[-scale, scale]`,
/// layer-norm gains near one, small biases.
pub fn random_store(config: &ModelConfig, seed: u64, scale: f32) -> NamedTensorStore {
    let mut store = NamedTensorStore::new();
    for (i, (name, shape)) in config.expected_tensors().into_iter().enumerate() {
        let mut rng = seed::stream(seed, "random-model", i as u64);
        let n: usize = shape.iter().product();
        let is_gain = name.contains("ln") && name.ends_with(".weight");
        let values: Vec<f32> = (0..n)
            .map(|_| {
                let u: f32 = rng.gen_range(-1.0..1.0);
                if is_gain {
                    1.0 + 0.1 * u
                } else if name.ends_with(".bias") {
                    0.1 * scale * u
                } else {
                    scale * u
                }
            })
            .collect();
        store
            .insert(name, Tensor::from_f32(shape, &values))
            .expect("shape and data agree");
    }
    store
}
