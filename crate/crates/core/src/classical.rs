//! Classical CP-PPA: soft-threshold primal step, extrapolation and the
//! analytic dual update, with the step-size certificate checked up front.
//!
//! The update formulas take their step sizes as real scalar tensors so the
//! unfolded network can reuse them on the tape.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::physics::{CoilSensitivities, KSpaceData, Physics};
use crate::tensor::{ops, DType, Tensor};

/// Upper bound on `|A^H A|` for the unitary FFT with a 0/1 mask and
/// root-sum-of-squares normalized coil maps.
pub const NORMAL_OP_BOUND: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CPPAConfig {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    pub threshold: f64,
    pub max_iters: usize,
    /// Stop once `|x_k - x_{k-1}| <= tol * |x_k|` and the same holds for `y`.
    pub tol: f64,
}

impl Default for CPPAConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            sigma: 0.5,
            theta: 1.0,
            threshold: 1e-3,
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

impl CPPAConfig {
    pub fn new(tau: f64, sigma: f64, theta: f64, threshold: f64, max_iters: usize, tol: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            sigma,
            theta,
            threshold,
            max_iters,
            tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    "cppa",
                    format!("{name} must be positive, got {v}"),
                ))
            }
        };
        positive(self.tau, "tau")?;
        positive(self.sigma, "sigma")?;
        if !(self.theta >= 0.0) {
            return Err(Error::invalid(
                "cppa",
                format!("theta must be >= 0, got {}", self.theta),
            ));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::invalid(
                "cppa",
                format!("threshold must be >= 0, got {}", self.threshold),
            ));
        }
        let product = self.tau * self.sigma * NORMAL_OP_BOUND;
        if product >= 1.0 {
            return Err(Error::Certificate { product });
        }
        Ok(())
    }
}

/// `(y + sigma (A z - k)) / (1 + sigma)` given `a_z = A z`.
pub fn update_y(y: &Tensor, a_z: &Tensor, k_tilde: &Tensor, sigma: &Tensor) -> Result<Tensor> {
    let step = ops::mul(sigma, &ops::sub(a_z, k_tilde)?)?;
    ops::div(&ops::add(y, &step)?, &ops::add_scalar(sigma, 1.0)?)
}

/// `x_next + theta (x_next - x)`.
pub fn extrapolate(x_next: &Tensor, x: &Tensor, theta: &Tensor) -> Result<Tensor> {
    ops::add(x_next, &ops::mul(theta, &ops::sub(x_next, x)?)?)
}

/// `x - tau A^H y` given `a_h_y = A^H y`.
pub fn primal_point(x: &Tensor, a_h_y: &Tensor, tau: &Tensor) -> Result<Tensor> {
    ops::sub(x, &ops::mul(tau, a_h_y)?)
}

/// Proximal map of `threshold * |.|_1`: complex soft-threshold.
pub fn prox_soft(x_bar: &Tensor, threshold: f64) -> Result<Tensor> {
    ops::soft_threshold(x_bar, threshold)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    /// `|A x_0 - k|` before the first update.
    pub initial_residual: f64,
    /// `|A x_k - k|` after update k.
    pub residual: Vec<f64>,
    /// `|x_k - x_{k-1}|`.
    pub delta: Vec<f64>,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.residual.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual.last().copied().unwrap_or(self.initial_residual)
    }

    /// `iter,residual,delta` rows; row 0 is the starting point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,residual,delta\n");
        let _ = writeln!(s, "0,{:e},0", self.initial_residual);
        for (i, (r, d)) in self.residual.iter().zip(&self.delta).enumerate() {
            let _ = writeln!(s, "{},{:e},{:e}", i + 1, r, d);
        }
        s
    }
}

/// Runs CP-PPA from `x = 0`, `y = 0`.
pub fn solve(
    k: &KSpaceData,
    sens: Option<&CoilSensitivities>,
    cfg: &CPPAConfig,
) -> Result<(Tensor, SolveTrace)> {
    let physics = Physics::for_kspace(k, sens)?;
    let x0 = Tensor::zeros(&physics.image_shape(), DType::Complex);
    solve_from(&physics, k.samples(), &x0, cfg)
}

/// Runs CP-PPA from a given primal start with `y = 0`.
pub fn solve_from(
    physics: &Physics,
    k_tilde: &Tensor,
    x0: &Tensor,
    cfg: &CPPAConfig,
) -> Result<(Tensor, SolveTrace)> {
    cfg.validate()?;
    let (tau, sigma, theta) = (
        Tensor::scalar(cfg.tau),
        Tensor::scalar(cfg.sigma),
        Tensor::scalar(cfg.theta),
    );
    let residual = |x: &Tensor| -> Result<f64> { Ok(ops::sub(&physics.forward(x)?, k_tilde)?.norm()) };
    let mut x = x0.detach();
    let mut y = Tensor::zeros(k_tilde.shape(), DType::Complex);
    let mut trace = SolveTrace {
        initial_residual: residual(&x)?,
        ..Default::default()
    };
    for _ in 0..cfg.max_iters {
        let x_bar = primal_point(&x, &physics.adjoint(&y)?, &tau)?;
        let x_next = prox_soft(&x_bar, cfg.threshold)?;
        let z = extrapolate(&x_next, &x, &theta)?;
        let y_next = update_y(&y, &physics.forward(&z)?, k_tilde, &sigma)?;
        let delta = ops::sub(&x_next, &x)?.norm();
        let delta_y = ops::sub(&y_next, &y)?.norm();
        x = x_next;
        y = y_next;
        trace.residual.push(residual(&x)?);
        trace.delta.push(delta);
        // the first primal step from y = 0 never moves x, so the dual
        // change has to settle as well
        if delta <= cfg.tol * x.norm() && delta_y <= cfg.tol * y.norm() {
            break;
        }
    }
    Ok((x, trace))
}
