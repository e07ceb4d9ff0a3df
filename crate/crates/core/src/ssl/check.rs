use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss_total, partition, LossWeights, PartitionSpec, Sample};
use crate::error::Result;
use crate::metrics::SsimParams;
use crate::model::{model_forward, ModelParams};
use crate::tensor::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::tensor::Tensor;

/// Copy of `params` with the output layer drawn from `U(-scale, scale)`.
///
/// A freshly initialized model has a zero output layer, which zeroes every
/// upstream gradient; gradient checks and liveness tests need a point where
/// all parameters influence the loss.
pub fn generic_point(params: &ModelParams, scale: f64, seed: u64) -> Result<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failed = None;
    let out = params.map(|name, t| {
        if !(name.ends_with("prox.out.weight") || name.ends_with("prox.out.bias")) {
            return t.clone();
        }
        let data = (0..t.data().len())
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        t.with_values(data).unwrap_or_else(|e| {
            failed = Some(e);
            t.clone()
        })
    });
    match failed {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Checks the gradient of `L_d` for one sample and partition against
/// central differences.
///
/// The full-input reconstruction is evaluated once at `params` and held
/// fixed while parameters are perturbed: the loss only sees it through a
/// stop-gradient, so its dependence on the parameters is not part of the
/// gradient being checked.
pub fn loss_gradcheck(
    sample: &Sample,
    params: &ModelParams,
    spec: &PartitionSpec,
    weights: &LossWeights,
    ssim: &SsimParams,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let physics = sample.physics()?;
    let k_p = partition(&sample.kspace, spec)?;
    let physics_p = physics.with_mask(k_p.mask());
    let k = sample.kspace.samples();
    let x_rec = model_forward(k, &params.detached(), &physics)?;

    let named: Vec<(String, Tensor)> = params.named().into_iter().map(|(n, t)| (n, t.detach())).collect();
    let f = |tensors: &[Tensor]| -> Result<Tensor> {
        let mut it = tensors.iter();
        let p = params.map(|_, t| it.next().cloned().unwrap_or_else(|| t.clone()));
        let x_rec_p = model_forward(k_p.samples(), &p, &physics_p)?;
        Ok(loss_total(&x_rec_p, &x_rec, k, weights, &physics, ssim)?.0)
    };
    grad_check(f, &named, options)
}
