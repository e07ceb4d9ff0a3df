use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operator::KSpaceData;
use crate::error::{Error, Result};
use crate::tensor::{fft, DType, Tensor};

/// Pixels whose low-resolution root-sum-of-squares falls below this
/// fraction of the maximum are left outside the map support.
pub const SUPPORT_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct CoilSensitivities {
    maps: Tensor,
    calibration_width: usize,
}

impl CoilSensitivities {
    pub fn new(maps: Tensor, calibration_width: usize) -> Result<Self> {
        maps.expect_dtype("sensitivities", DType::Complex)?;
        if maps.shape().len() != 3 {
            return Err(Error::invalid(
                "sensitivities",
                format!("expected C x H x W maps, got {:?}", maps.shape()),
            ));
        }
        Ok(Self {
            maps,
            calibration_width,
        })
    }

    /// `C x H x W` complex maps.
    pub fn maps(&self) -> &Tensor {
        &self.maps
    }

    pub fn calibration_width(&self) -> usize {
        self.calibration_width
    }

    pub fn coil_count(&self) -> usize {
        self.maps.shape()[0]
    }

    /// Root-sum-of-squares over coils per pixel.
    pub fn rss(&self) -> Vec<f64> {
        rss(self.maps.data(), self.coil_count())
    }
}

fn rss(maps: &[f64], coils: usize) -> Vec<f64> {
    let n = maps.len() / 2 / coils;
    (0..n)
        .map(|p| {
            (0..coils)
                .map(|c| {
                    let z = &maps[2 * (c * n + p)..2 * (c * n + p) + 2];
                    z[0] * z[0] + z[1] * z[1]
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Divides every pixel by the coil root-sum-of-squares and rotates it so
/// the coil sum is real and positive. Pixels with `rss <= cutoff` become 0.
fn normalize(maps: &mut [f64], coils: usize, cutoff: f64) {
    let n = maps.len() / 2 / coils;
    let norms = rss(maps, coils);
    for p in 0..n {
        if norms[p] <= cutoff {
            for c in 0..coils {
                maps[2 * (c * n + p)] = 0.0;
                maps[2 * (c * n + p) + 1] = 0.0;
            }
            continue;
        }
        let (mut sr, mut si) = (0.0, 0.0);
        for c in 0..coils {
            sr += maps[2 * (c * n + p)];
            si += maps[2 * (c * n + p) + 1];
        }
        let mag = sr.hypot(si);
        let (pr, pi) = if mag > 0.0 {
            (sr / mag, -si / mag)
        } else {
            (1.0, 0.0)
        };
        for c in 0..coils {
            let i = 2 * (c * n + p);
            let (a, b) = (maps[i] / norms[p], maps[i + 1] / norms[p]);
            maps[i] = a * pr - b * pi;
            maps[i + 1] = a * pi + b * pr;
        }
    }
}

/// Hann taper of length `len` without zero end points.
fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (PI * (n + 1) as f64 / (len + 1) as f64).sin().powi(2))
        .collect()
}

/// Calibration-region estimate: each coil's Hann-windowed center k-space is
/// transformed to a low-resolution image, then normalized by the coil
/// root-sum-of-squares and phase-referenced to the coil sum.
pub fn estimate_sensitivities(k: &KSpaceData) -> Result<CoilSensitivities> {
    let mask = k.mask();
    let calib = mask.center_count();
    if calib < 4 {
        return Err(Error::invalid(
            "estimate_sensitivities",
            format!("need at least 4 center lines, mask has {calib}"),
        ));
    }
    let (coils, h, w) = (k.coil_count(), k.height(), k.width());
    let rows = ((calib * h) as f64 / w as f64).round().max(1.0) as usize;
    let col_taper = hann(calib);
    let row_taper = hann(rows);
    let mut weight = vec![0.0; h * w];
    for (ri, rt) in row_taper.iter().enumerate() {
        let r = (h / 2 - rows / 2 + ri + h / 2) % h;
        for (ci, c) in mask.center_lines().enumerate() {
            weight[r * w + mask.storage_column(c)] = rt * col_taper[ci];
        }
    }
    let data = k.samples().data();
    let mut maps: Vec<f64> = data
        .chunks_exact(2)
        .enumerate()
        .flat_map(|(i, z)| {
            let wt = weight[i % (h * w)];
            [z[0] * wt, z[1] * wt]
        })
        .collect();
    if maps.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid(
            "estimate_sensitivities",
            "calibration region is all zero",
        ));
    }
    fft::fft2_planes(&mut maps, h, w, true);
    let peak = rss(&maps, coils).into_iter().fold(0.0, f64::max);
    normalize(&mut maps, coils, SUPPORT_THRESHOLD * peak);
    CoilSensitivities::new(Tensor::complex(&[coils, h, w], maps)?, calib)
}

/// Smooth synthetic coil maps: Gaussian receive profiles from coils placed
/// around the field of view, with a slowly varying phase, normalized the
/// same way as [`estimate_sensitivities`].
pub fn synthetic_sensitivities(coils: usize, h: usize, w: usize, seed: u64) -> Result<CoilSensitivities> {
    if coils == 0 {
        return Err(Error::invalid(
            "synthetic_sensitivities",
            "need at least one coil",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maps = Vec::with_capacity(2 * coils * h * w);
    for c in 0..coils {
        let angle = 2.0 * PI * c as f64 / coils as f64 + rng.random_range(-0.2..0.2);
        let (cy, cx) = (1.3 * angle.sin(), 1.3 * angle.cos());
        let width = rng.random_range(0.9..1.3);
        let (fy, fx) = (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        let offset = rng.random_range(-PI..PI);
        for i in 0..h {
            let y = (2 * i + 1) as f64 / h as f64 - 1.0;
            for j in 0..w {
                let x = (2 * j + 1) as f64 / w as f64 - 1.0;
                let d2 = (y - cy).powi(2) + (x - cx).powi(2);
                let mag = (-d2 / (2.0 * width * width)).exp();
                let phase = offset + PI * (fy * y + fx * x);
                maps.push(mag * phase.cos());
                maps.push(mag * phase.sin());
            }
        }
    }
    normalize(&mut maps, coils, 0.0);
    CoilSensitivities::new(Tensor::complex(&[coils, h, w], maps)?, 0)
}
