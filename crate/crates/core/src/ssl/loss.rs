use crate::error::{Error, Result};
use crate::metrics::SsimParams;
use crate::physics::Physics;
use crate::tensor::{ops, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct LossWeights {
    /// Re-visible mixing weight.
    pub lambda: f64,
    /// Regularization weight.
    pub eta: f64,
    /// k-space / image balance.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            eta: 1.0,
            beta: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("eta", self.eta), ("beta", self.beta)] {
            if !(v >= 0.0) {
                return Err(Error::invalid("loss", format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_k_rev: f64,
    pub l_k_reg: f64,
    pub l_img_rev: f64,
    pub l_img_reg: f64,
    pub l_k: f64,
    pub l_img: f64,
    pub l_d: f64,
}

impl LossBreakdown {
    /// Componentwise mean.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut m = LossBreakdown::default();
        for b in items {
            m.l_k_rev += b.l_k_rev / n;
            m.l_k_reg += b.l_k_reg / n;
            m.l_img_rev += b.l_img_rev / n;
            m.l_img_reg += b.l_img_reg / n;
            m.l_k += b.l_k / n;
            m.l_img += b.l_img / n;
            m.l_d += b.l_d / n;
        }
        m
    }
}

/// Mean over all entries of `|a - b|` (complex magnitude).
pub fn l1_kspace(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    ops::mean(&ops::magnitude(&ops::sub(a, b)?)?)
}

/// `(A x_p + lambda A sg(x)) / (1 + lambda)`.
fn revisible_kspace(x_rec_p: &Tensor, x_rec: &Tensor, lambda: f64, physics: &Physics) -> Result<Tensor> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(
            "loss",
            format!("lambda must be >= 0, got {lambda}"),
        ));
    }
    let live = physics.forward(x_rec_p)?;
    let frozen = physics.forward(&ops::stop_gradient(x_rec))?;
    ops::scale(
        &ops::add(&live, &ops::scale(&frozen, lambda)?)?,
        1.0 / (1.0 + lambda),
    )
}

pub fn loss_k_rev(
    x_rec_p: &Tensor,
    x_rec: &Tensor,
    k_tilde: &Tensor,
    lambda: f64,
    physics: &Physics,
) -> Result<Tensor> {
    l1_kspace(&revisible_kspace(x_rec_p, x_rec, lambda, physics)?, k_tilde)
}

pub fn loss_k_reg(x_rec_p: &Tensor, k_tilde: &Tensor, physics: &Physics) -> Result<Tensor> {
    l1_kspace(&physics.forward(x_rec_p)?, k_tilde)
}

/// Mean SSIM between a recorded real image and a constant reference, built
/// from tape operations.
pub fn ssim_tensor(
    test: &Tensor,
    reference: &Tensor,
    data_range: f64,
    params: &SsimParams,
) -> Result<Tensor> {
    if !(data_range > 0.0) {
        return Err(Error::invalid(
            "ssim",
            format!("data_range must be > 0, got {data_range}"),
        ));
    }
    let taps = params.taps();
    let (c1, c2) = params.constants(data_range);
    let f = |t: &Tensor| ops::separable_filter_valid(t, &taps);
    let y = reference.detach();
    let mx = f(test)?;
    let my = f(&y)?;
    let mxx = f(&ops::mul(test, test)?)?;
    let myy = f(&ops::mul(&y, &y)?)?;
    let mxy = f(&ops::mul(test, &y)?)?;
    let mx_my = ops::mul(&mx, &my)?;
    let mx2 = ops::mul(&mx, &mx)?;
    let my2 = ops::mul(&my, &my)?;
    let num = ops::mul(
        &ops::add_scalar(&ops::scale(&mx_my, 2.0)?, c1)?,
        &ops::add_scalar(&ops::scale(&ops::sub(&mxy, &mx_my)?, 2.0)?, c2)?,
    )?;
    let var_sum = ops::add(&ops::sub(&mxx, &mx2)?, &ops::sub(&myy, &my2)?)?;
    let den = ops::mul(
        &ops::add_scalar(&ops::add(&mx2, &my2)?, c1)?,
        &ops::add_scalar(&var_sum, c2)?,
    )?;
    ops::mean(&ops::div(&num, &den)?)
}

/// Magnitude of the zero-filled reference `|A^H k|` and its data range.
pub fn reference_image(k_tilde: &Tensor, physics: &Physics) -> Result<(Tensor, f64)> {
    let img = ops::magnitude(&physics.adjoint(&k_tilde.detach())?)?;
    let range = crate::metrics::data_range(&img);
    Ok((img, if range > 0.0 { range } else { 1.0 }))
}

/// `1 - SSIM(|A^H mix|, |A^H k|)` with the re-visible k-space mix.
pub fn loss_img_rev(
    x_rec_p: &Tensor,
    x_rec: &Tensor,
    k_tilde: &Tensor,
    lambda: f64,
    physics: &Physics,
    ssim: &SsimParams,
) -> Result<Tensor> {
    let (reference, range) = reference_image(k_tilde, physics)?;
    let mix = revisible_kspace(x_rec_p, x_rec, lambda, physics)?;
    let img = ops::magnitude(&physics.adjoint(&mix)?)?;
    one_minus(&ssim_tensor(&img, &reference, range, ssim)?)
}

/// `1 - SSIM(|A^H A x_p|, |A^H k|)`.
pub fn loss_img_reg(
    x_rec_p: &Tensor,
    k_tilde: &Tensor,
    physics: &Physics,
    ssim: &SsimParams,
) -> Result<Tensor> {
    let (reference, range) = reference_image(k_tilde, physics)?;
    let img = ops::magnitude(&physics.normal(x_rec_p)?)?;
    one_minus(&ssim_tensor(&img, &reference, range, ssim)?)
}

fn one_minus(t: &Tensor) -> Result<Tensor> {
    ops::add_scalar(&ops::scale(t, -1.0)?, 1.0)
}

/// `L_img = L_img_rev + eta L_img_reg`.
pub fn loss_img(
    x_rec_p: &Tensor,
    x_rec: &Tensor,
    k_tilde: &Tensor,
    lambda: f64,
    eta: f64,
    physics: &Physics,
    ssim: &SsimParams,
) -> Result<Tensor> {
    let rev = loss_img_rev(x_rec_p, x_rec, k_tilde, lambda, physics, ssim)?;
    let reg = loss_img_reg(x_rec_p, k_tilde, physics, ssim)?;
    ops::add(&rev, &ops::scale(&reg, eta)?)
}

/// All loss terms; returns the differentiable `L_d` with its breakdown.
///
/// `physics` is the operator of the full (not partitioned) measurement.
pub fn loss_total(
    x_rec_p: &Tensor,
    x_rec: &Tensor,
    k_tilde: &Tensor,
    weights: &LossWeights,
    physics: &Physics,
    ssim: &SsimParams,
) -> Result<(Tensor, LossBreakdown)> {
    weights.validate()?;
    let k_rev = loss_k_rev(x_rec_p, x_rec, k_tilde, weights.lambda, physics)?;
    let k_reg = loss_k_reg(x_rec_p, k_tilde, physics)?;
    let img_rev = loss_img_rev(x_rec_p, x_rec, k_tilde, weights.lambda, physics, ssim)?;
    let img_reg = loss_img_reg(x_rec_p, k_tilde, physics, ssim)?;
    let l_k = ops::add(&k_rev, &ops::scale(&k_reg, weights.eta)?)?;
    let l_img = ops::add(&img_rev, &ops::scale(&img_reg, weights.eta)?)?;
    let l_d = ops::add(&l_img, &ops::scale(&l_k, weights.beta)?)?;
    let breakdown = LossBreakdown {
        l_k_rev: k_rev.item()?,
        l_k_reg: k_reg.item()?,
        l_img_rev: img_rev.item()?,
        l_img_reg: img_reg.item()?,
        l_k: l_k.item()?,
        l_img: l_img.item()?,
        l_d: l_d.item()?,
    };
    Ok((l_d, breakdown))
}
