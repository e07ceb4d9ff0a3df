use super::params::{ModelParams, StageParams};
use super::proxnet::proxnet_apply;
use crate::classical::{extrapolate, primal_point, update_y};
use crate::error::Result;
use crate::physics::Physics;
use crate::tensor::{ops, DType, Tensor};

/// One unfolded iteration:
/// `x' = x + ProxNet(x - tau A^H y)`, `z = x' + theta (x' - x)`,
/// `y' = (y + sigma (A z - k)) / (1 + sigma)`.
pub fn stage_forward(
    x: &Tensor,
    y: &Tensor,
    k_tilde: &Tensor,
    stage: &StageParams,
    params: &ModelParams,
    physics: &Physics,
) -> Result<(Tensor, Tensor)> {
    let x_bar = primal_point(x, &physics.adjoint(y)?, &stage.tau()?)?;
    let correction = proxnet_apply(&ops::complex_to_channels(&x_bar)?, &stage.proxnet, &params.config)?;
    let x_next = ops::add(x, &ops::channels_to_complex(&correction)?)?;
    let z = extrapolate(&x_next, x, &stage.theta()?)?;
    let y_next = update_y(y, &physics.forward(&z)?, k_tilde, &stage.sigma()?)?;
    Ok((x_next, y_next))
}

/// Runs all stages from `x_0 = A^H k`, `y_0 = 0` and returns `x_K`.
pub fn model_forward(k_tilde: &Tensor, params: &ModelParams, physics: &Physics) -> Result<Tensor> {
    let mut x = physics.adjoint(k_tilde)?;
    let mut y = Tensor::zeros(k_tilde.shape(), DType::Complex);
    for stage in &params.stages {
        (x, y) = stage_forward(&x, &y, k_tilde, stage, params, physics)?;
    }
    Ok(x)
}

/// `x + A^H (k - A x)`: puts the measured samples back in place of the
/// predicted ones (exactly so for a single coil).
pub fn data_consistency(x: &Tensor, k_tilde: &Tensor, physics: &Physics) -> Result<Tensor> {
    let residual = ops::sub(k_tilde, &physics.forward(x)?)?;
    ops::add(x, &physics.adjoint(&residual)?)
}

/// Inference: forward pass on detached parameters, optionally followed by
/// [`data_consistency`].
pub fn reconstruct(
    k_tilde: &Tensor,
    params: &ModelParams,
    physics: &Physics,
    replace_measured: bool,
) -> Result<Tensor> {
    let params = params.detached();
    let x = model_forward(&k_tilde.detach(), &params, physics)?;
    if replace_measured {
        data_consistency(&x, k_tilde, physics)
    } else {
        Ok(x)
    }
}
