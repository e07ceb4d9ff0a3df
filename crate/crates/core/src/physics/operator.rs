use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::coils::CoilSensitivities;
use super::mask::SamplingMask;
use crate::error::{Error, Result};
use crate::tensor::{ops, DType, Tensor};

/// Under-sampled k-space, `C x H x W` complex, exactly zero off the mask.
#[derive(Clone, Debug)]
pub struct KSpaceData {
    samples: Tensor,
    mask: SamplingMask,
}

impl KSpaceData {
    /// Wraps samples that already vanish on unsampled columns.
    pub fn new(samples: Tensor, mask: SamplingMask) -> Result<Self> {
        check_kspace_shape(&samples, &mask)?;
        let weights = mask.column_weights();
        let w = mask.width();
        let off_mask = samples
            .data()
            .chunks_exact(2)
            .enumerate()
            .any(|(i, z)| weights[i % w] == 0.0 && (z[0] != 0.0 || z[1] != 0.0));
        if off_mask {
            return Err(Error::invalid("kspace", "nonzero samples on unsampled columns"));
        }
        Ok(Self { samples, mask })
    }

    /// Masks fully-sampled k-space.
    pub fn from_full(full: &Tensor, mask: SamplingMask) -> Result<Self> {
        check_kspace_shape(full, &mask)?;
        let samples = ops::apply_mask(&full.detach(), &mask.column_weights())?;
        Ok(Self { samples, mask })
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn coil_count(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.samples.shape()[2]
    }

    /// Same data restricted to a sub-mask of the current one.
    pub fn restrict(&self, mask: SamplingMask) -> Result<Self> {
        Self::from_full(&self.samples, mask)
    }
}

fn check_kspace_shape(samples: &Tensor, mask: &SamplingMask) -> Result<()> {
    samples.expect_dtype("kspace", DType::Complex)?;
    let s = samples.shape();
    if s.len() != 3 || s[2] != mask.width() {
        return Err(Error::shape(
            "kspace",
            s,
            &[s.first().copied().unwrap_or(0), 0, mask.width()],
        ));
    }
    Ok(())
}

/// The acquisition operator `A = M F` (single coil) or `A = M F S`
/// (multi coil). Built from recorded tensor ops so it participates in
/// differentiation.
#[derive(Clone, Debug)]
pub struct Physics {
    mask: SamplingMask,
    columns: Arc<Vec<f64>>,
    height: usize,
    sens: Option<Tensor>,
}

impl Physics {
    pub fn single(mask: &SamplingMask, height: usize) -> Self {
        Self {
            columns: mask.column_weights(),
            mask: mask.clone(),
            height,
            sens: None,
        }
    }

    pub fn multi(mask: &SamplingMask, sens: &CoilSensitivities) -> Result<Self> {
        let s = sens.maps().shape();
        if s[2] != mask.width() {
            return Err(Error::shape("physics", s, &[s[0], s[1], mask.width()]));
        }
        Ok(Self {
            columns: mask.column_weights(),
            mask: mask.clone(),
            height: s[1],
            sens: Some(sens.maps().clone()),
        })
    }

    /// Operator matching `k`: single coil when `sens` is `None`.
    pub fn for_kspace(k: &KSpaceData, sens: Option<&CoilSensitivities>) -> Result<Self> {
        let p = match sens {
            Some(s) => Self::multi(k.mask(), s)?,
            None => {
                if k.coil_count() != 1 {
                    return Err(Error::invalid(
                        "physics",
                        format!("{} coils need sensitivity maps", k.coil_count()),
                    ));
                }
                Self::single(k.mask(), k.height())
            }
        };
        if p.coil_count() != k.coil_count() || p.height != k.height() {
            return Err(Error::shape("physics", &p.kspace_shape(), k.samples().shape()));
        }
        Ok(p)
    }

    /// Same coils, different mask.
    pub fn with_mask(&self, mask: &SamplingMask) -> Self {
        Self {
            columns: mask.column_weights(),
            mask: mask.clone(),
            height: self.height,
            sens: self.sens.clone(),
        }
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn coil_count(&self) -> usize {
        self.sens.as_ref().map_or(1, |s| s.shape()[0])
    }

    pub fn image_shape(&self) -> [usize; 2] {
        [self.height, self.mask.width()]
    }

    pub fn kspace_shape(&self) -> [usize; 3] {
        [self.coil_count(), self.height, self.mask.width()]
    }

    /// `H x W` image to `C x H x W` masked k-space.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != self.image_shape() {
            return Err(Error::shape("forward", x.shape(), &self.image_shape()));
        }
        let coil_images = match &self.sens {
            Some(s) => ops::coil_expand(x, s)?,
            None => ops::reshape(x, &self.kspace_shape())?,
        };
        ops::apply_mask(&ops::fft2(&coil_images)?, &self.columns)
    }

    /// Adjoint of [`Physics::forward`].
    pub fn adjoint(&self, k: &Tensor) -> Result<Tensor> {
        if k.shape() != self.kspace_shape() {
            return Err(Error::shape("adjoint", k.shape(), &self.kspace_shape()));
        }
        let coil_images = ops::ifft2(&ops::apply_mask(k, &self.columns)?)?;
        match &self.sens {
            Some(s) => ops::coil_combine(&coil_images, s),
            None => ops::reshape(&coil_images, &self.image_shape()),
        }
    }

    /// `A^H A x`.
    pub fn normal(&self, x: &Tensor) -> Result<Tensor> {
        self.adjoint(&self.forward(x)?)
    }

    /// Power-iteration estimate of `|A^H A|`.
    pub fn normal_norm(&self, iterations: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.height * self.mask.width();
        let init = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut x = Tensor::complex(&self.image_shape(), init)?;
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let norm = x.norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            x = ops::scale(&x, 1.0 / norm)?;
            let ax = self.normal(&x)?;
            estimate = x.dot_re(&ax)?;
            x = ax;
        }
        Ok(estimate)
    }
}

/// `M F x` for an `H x W` image; returns single-coil data.
pub fn forward_single(x: &Tensor, mask: &SamplingMask) -> Result<KSpaceData> {
    let p = Physics::single(mask, x.shape().first().copied().unwrap_or(0));
    Ok(KSpaceData {
        samples: p.forward(&x.detach())?,
        mask: mask.clone(),
    })
}

/// `F^H M k` for single-coil data.
pub fn adjoint_single(k: &KSpaceData) -> Result<Tensor> {
    Physics::for_kspace(k, None)?.adjoint(k.samples())
}

/// `M F (S_c x)` for every coil.
pub fn forward_multi(x: &Tensor, sens: &CoilSensitivities, mask: &SamplingMask) -> Result<KSpaceData> {
    let p = Physics::multi(mask, sens)?;
    Ok(KSpaceData {
        samples: p.forward(&x.detach())?,
        mask: mask.clone(),
    })
}

/// `sum_c conj(S_c) F^H M k_c`.
pub fn adjoint_multi(k: &KSpaceData, sens: &CoilSensitivities) -> Result<Tensor> {
    Physics::for_kspace(k, Some(sens))?.adjoint(k.samples())
}

/// Zero-filled reconstruction `A^H k`.
pub fn zero_filled(k: &KSpaceData, sens: Option<&CoilSensitivities>) -> Result<Tensor> {
    Physics::for_kspace(k, sens)?.adjoint(k.samples())
}
