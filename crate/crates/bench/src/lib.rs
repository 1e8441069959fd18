//! Shared fixtures for the criterion benches.

use conformal_box_core::{
    generate, match_dataset, pooled_pairs, DetectionDataset, GeneratorConfig, MatchedPair,
    NoiseModel,
};

/// A mid-sized synthetic dataset with the default detector error model.
pub fn dataset(n_images: usize) -> DetectionDataset {
    generate(&GeneratorConfig {
        n_images,
        boxes_per_image: 4.0,
        noise: NoiseModel {
            seed: 1234,
            ..NoiseModel::default()
        },
        ..GeneratorConfig::default()
    })
    .expect("valid bench config")
}

/// All matched pairs of `dataset(n_images)` at IoU threshold 0.5.
pub fn pairs(n_images: usize) -> Vec<MatchedPair> {
    pooled_pairs(&match_dataset(&dataset(n_images), 0.5))
}
