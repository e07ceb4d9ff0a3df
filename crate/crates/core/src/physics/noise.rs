use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::operator::KSpaceData;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Adds complex white Gaussian noise to the sampled entries only. The noise
/// has standard deviation `sigma_n * mean|k|` (over sampled entries), split
/// evenly between the real and imaginary parts.
pub fn add_kspace_noise(k: &KSpaceData, sigma_n: f64, seed: u64) -> Result<KSpaceData> {
    if !(sigma_n >= 0.0) {
        return Err(Error::invalid(
            "add_kspace_noise",
            format!("sigma_n must be >= 0, got {sigma_n}"),
        ));
    }
    if sigma_n == 0.0 {
        return Ok(k.clone());
    }
    let weights = k.mask().column_weights();
    let w = k.width();
    let sampled = |i: usize| weights[i % w] != 0.0;
    let data = k.samples().data();
    let (mut total, mut count) = (0.0, 0usize);
    for (i, z) in data.chunks_exact(2).enumerate() {
        if sampled(i) {
            total += z[0].hypot(z[1]);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(k.clone());
    }
    let std = sigma_n * total / count as f64 / std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.to_vec();
    for (i, z) in out.chunks_exact_mut(2).enumerate() {
        if sampled(i) {
            let nr: f64 = StandardNormal.sample(&mut rng);
            let ni: f64 = StandardNormal.sample(&mut rng);
            z[0] += std * nr;
            z[1] += std * ni;
        }
    }
    KSpaceData::new(Tensor::complex(k.samples().shape(), out)?, k.mask().clone())
}
