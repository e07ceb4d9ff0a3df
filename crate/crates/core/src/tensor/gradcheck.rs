//! Central-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward, Tape, Tensor};
use crate::error::Result;

/// Finite-difference stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, error `O(h^2)`.
    Central2,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`, error `O(h^4)`.
    Central4,
}

/// What a component's error is divided by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorScale {
    /// `max(|analytic|, |numeric|, floor)` of the component itself.
    Entry,
    /// Largest `|analytic|` over the whole parameter, or `|numeric|` over
    /// its checked components (at least `floor`). Components far below the
    /// group's magnitude are then judged against the group, not against
    /// their own round-off.
    Group,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub stencil: Stencil,
    pub scale: ErrorScale,
    /// Pass threshold on the relative error.
    pub tolerance: f64,
    /// Gradients smaller than this (in both routes) are compared absolutely.
    pub floor: f64,
    /// Check at most this many randomly chosen components per parameter.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            stencil: Stencil::Central2,
            scale: ErrorScale::Entry,
            tolerance: 1e-6,
            floor: 1e-6,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    /// Largest |analytic| among checked components.
    pub max_analytic: f64,
    /// Largest |numeric| among checked components.
    pub max_numeric: f64,
    /// Component with the largest relative error and its two estimates.
    pub worst: Option<(usize, f64, f64)>,
}

impl ParamReport {
    /// Backward gave exactly zero everywhere while differences did not:
    /// the signature of a stop-gradient path.
    pub fn analytic_zero_numeric_nonzero(&self, floor: f64) -> bool {
        self.max_analytic == 0.0 && self.max_numeric > floor
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamReport>,
    pub options: GradCheckOptions,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err < self.options.tolerance)
    }

    /// Parameters whose mismatch is the analytic-zero kind.
    pub fn stop_gradient_mismatches(&self) -> Vec<&ParamReport> {
        self.params
            .iter()
            .filter(|p| p.analytic_zero_numeric_nonzero(self.options.floor))
            .collect()
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn summarize(
    name: &str,
    pairs: &[(usize, f64, f64)],
    full_max: f64,
    options: &GradCheckOptions,
) -> ParamReport {
    let max_analytic = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let max_numeric = pairs.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    let group = full_max.max(max_numeric).max(options.floor);
    let mut report = ParamReport {
        name: name.to_string(),
        checked: pairs.len(),
        max_rel_err: 0.0,
        max_analytic,
        max_numeric,
        worst: None,
    };
    for &(j, a, n) in pairs {
        let err = match options.scale {
            ErrorScale::Entry => relative_error(a, n, options.floor),
            ErrorScale::Group => (a - n).abs() / group,
        };
        if report.worst.is_none() || err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst = Some((j, a, n));
        }
    }
    report
}

/// Compares `backward` against central differences of `f` for each named
/// parameter. `f` must be deterministic and return a real scalar.
pub fn grad_check<F>(f: F, params: &[(String, Tensor)], options: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor]) -> Result<Tensor>,
{
    let tape = Tape::new();
    let leaves: Vec<Tensor> = params.iter().map(|(_, t)| tape.leaf(t)).collect();
    let loss = f(&leaves)?;
    let grads = backward(&loss)?;

    let mut base: Vec<Tensor> = params.iter().map(|(_, t)| t.detach()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut reports = Vec::with_capacity(params.len());
    for (i, (name, param)) in params.iter().enumerate() {
        let leaf_grad = grads.get(&leaves[i]);
        let analytic = leaf_grad.data();
        let len = param.data().len();
        let entries: Vec<usize> = match options.max_entries {
            Some(m) if m < len => {
                let mut e = sample(&mut rng, len, m).into_vec();
                e.sort_unstable();
                e
            }
            _ => (0..len).collect(),
        };
        let mut pairs = Vec::with_capacity(entries.len());
        for &j in &entries {
            let original = param.data()[j];
            let mut eval_at = |v: f64| -> Result<f64> {
                let mut data = param.to_vec();
                data[j] = v;
                base[i] = param.with_data(data);
                f(&base)?.item()
            };
            let h = options.step;
            let numeric = match options.stencil {
                Stencil::Central2 => (eval_at(original + h)? - eval_at(original - h)?) / (2.0 * h),
                Stencil::Central4 => {
                    let (p1, m1) = (eval_at(original + h)?, eval_at(original - h)?);
                    let (p2, m2) = (eval_at(original + 2.0 * h)?, eval_at(original - 2.0 * h)?);
                    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
                }
            };
            pairs.push((j, analytic[j], numeric));
        }
        base[i] = param.detach();
        let full_max = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        reports.push(summarize(name, &pairs, full_max, options));
    }
    Ok(GradCheckReport {
        params: reports,
        options: options.clone(),
    })
}
