#![allow(dead_code)]

pub mod toy;

use std::f64::consts::PI;

use dunmri_core::tensor::ops;
use dunmri_core::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_real(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::real(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_complex(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::complex(shape, (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Unitary 2-D DFT by direct summation over each trailing plane.
pub fn naive_dft2(x: &Tensor, inverse: bool) -> Vec<f64> {
    let s = x.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = Vec::with_capacity(x.data().len());
    for plane in x.data().chunks_exact(2 * h * w) {
        for u in 0..h {
            for v in 0..w {
                let (mut re, mut im) = (0.0, 0.0);
                for y in 0..h {
                    for xx in 0..w {
                        let a = sign * 2.0 * PI * ((u * y) as f64 / h as f64 + (v * xx) as f64 / w as f64);
                        let (c, sn) = (a.cos(), a.sin());
                        let (pr, pi) = (plane[2 * (y * w + xx)], plane[2 * (y * w + xx) + 1]);
                        re += pr * c - pi * sn;
                        im += pr * sn + pi * c;
                    }
                }
                out.push(re * scale);
                out.push(im * scale);
            }
        }
    }
    out
}

/// Real scalar `Re<a, y>` built from recorded ops so it can be differentiated.
pub fn real_dot(a: &Tensor, y: &Tensor) -> Result<Tensor> {
    if a.is_complex() {
        let conj: Vec<f64> = y.data().chunks_exact(2).flat_map(|z| [z[0], -z[1]]).collect();
        let yc = Tensor::complex(y.shape(), conj)?;
        ops::sum(&ops::real_part(&ops::mul(a, &yc)?)?)
    } else {
        ops::sum(&ops::mul(a, y)?)
    }
}

/// Mean SSIM by direct summation over every valid 2-D Gaussian window.
pub fn naive_ssim(x: &[f64], y: &[f64], h: usize, w: usize, range: f64, win: usize, sigma: f64) -> f64 {
    let c = (win as f64 - 1.0) / 2.0;
    let mut kernel = vec![0.0; win * win];
    for i in 0..win {
        for j in 0..win {
            let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            kernel[i * win + j] = (-r2 / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let mut acc = 0.0;
    let (oh, ow) = (h - win + 1, w - win + 1);
    for r in 0..oh {
        for s in 0..ow {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let k = kernel[i * win + j];
                    let (a, b) = (x[(r + i) * w + s + j], y[(r + i) * w + s + j]);
                    mx += k * a;
                    my += k * b;
                    sxx += k * a * a;
                    syy += k * b * b;
                    sxy += k * a * b;
                }
            }
            let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            acc += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    acc / (oh * ow) as f64
}
