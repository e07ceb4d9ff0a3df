#![allow(dead_code)]

use dunmri_core::model::{ModelConfig, ModelParams};
use dunmri_core::physics::*;
use dunmri_core::ssl::{generic_point, Sample};

pub fn toy_config(stages: usize, channels: usize, size: usize, levels: usize) -> ModelConfig {
    ModelConfig {
        stages,
        base_channels: channels,
        levels,
        height: size,
        width: size,
        ..Default::default()
    }
}

/// Initialized params with the zero-initialized output layer replaced by
/// small random values, so every parameter sits at a generic point.
pub fn generic_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    generic_point(&ModelParams::init(cfg, seed).unwrap(), 0.3, seed ^ 0x5eed).unwrap()
}

pub fn phantom_sample(size: usize, accel: u32, seed: u64) -> Sample {
    let x = make_phantom(size, size, PhantomKind::RandomEllipses, seed).unwrap();
    let m = make_mask(size, accel, MaskPattern::Random, seed).unwrap();
    Sample {
        id: format!("p{seed}"),
        kspace: forward_single(&x, &m).unwrap(),
        sens: None,
    }
}
