use super::params::{DecoderParams, ModelConfig, ProxNetParams, SffeParams};
use crate::error::{Error, Result};
use crate::tensor::{ops, Tensor};

/// Spatial-frequency feature extraction block.
///
/// Spatial branch: 3x3 conv, instance norm, leaky ReLU. Frequency branch:
/// per-channel FFT, product with the complex global filter, inverse FFT,
/// real part. The two are concatenated, fused by a 1x1 conv, and added to
/// a 1x1 projection of the input.
pub fn sffe_block(f_in: &Tensor, p: &SffeParams, cfg: &ModelConfig) -> Result<Tensor> {
    let fs = p.global_filter.shape();
    if f_in.shape() != fs {
        return Err(Error::shape("sffe_block", f_in.shape(), fs));
    }
    let spatial = ops::conv2d(f_in, &p.spatial_weight, None)?;
    let spatial = ops::instance_norm(&spatial, &p.norm_gamma, &p.norm_beta, cfg.norm_eps)?;
    let spatial = ops::leaky_relu(&spatial, cfg.slope)?;
    let freq = ops::fft2(&ops::to_complex(f_in)?)?;
    let freq = ops::real_part(&ops::ifft2(&ops::mul(&freq, &p.global_filter)?)?)?;
    let fused = ops::conv2d(
        &ops::concat_channels(&spatial, &freq)?,
        &p.fuse_weight,
        Some(&p.fuse_bias),
    )?;
    ops::add(&fused, &ops::conv2d(f_in, &p.proj_weight, None)?)
}

fn conv_block(x: &Tensor, w: &Tensor, gamma: &Tensor, beta: &Tensor, cfg: &ModelConfig) -> Result<Tensor> {
    let h = ops::conv2d(x, w, None)?;
    ops::leaky_relu(&ops::instance_norm(&h, gamma, beta, cfg.norm_eps)?, cfg.slope)
}

fn decoder_block(below: &Tensor, skip: &Tensor, p: &DecoderParams, cfg: &ModelConfig) -> Result<Tensor> {
    let up = ops::transpose_conv_up2(below, &p.up_weight, None)?;
    let h = conv_block(
        &ops::concat_channels(&up, skip)?,
        &p.conv1_weight,
        &p.norm1_gamma,
        &p.norm1_beta,
        cfg,
    )?;
    conv_block(&h, &p.conv2_weight, &p.norm2_gamma, &p.norm2_beta, cfg)
}

/// U-Net over a `2 x H x W` real view of a complex image; returns a
/// `2 x H x W` correction.
pub fn proxnet_apply(v: &Tensor, p: &ProxNetParams, cfg: &ModelConfig) -> Result<Tensor> {
    let s = v.shape();
    if s.len() != 3 || s[0] != 2 {
        return Err(Error::invalid(
            "proxnet",
            format!("expected 2 x H x W input, got {s:?}"),
        ));
    }
    let min = 1usize << p.encoder.len();
    if s[1] < min || s[2] < min || s[1] % min != 0 || s[2] % min != 0 {
        return Err(Error::invalid(
            "proxnet",
            format!("{}x{} is too small for {} levels", s[1], s[2], p.encoder.len()),
        ));
    }
    let mut skips = Vec::with_capacity(p.encoder.len());
    let mut h = v.clone();
    for enc in &p.encoder {
        let f = sffe_block(&h, enc, cfg)?;
        h = ops::avg_pool2(&f)?;
        skips.push(f);
    }
    for (dec, skip) in p.decoder.iter().zip(&skips).rev() {
        h = decoder_block(&h, skip, dec, cfg)?;
    }
    ops::conv2d(&h, &p.out_weight, Some(&p.out_bias))
}
