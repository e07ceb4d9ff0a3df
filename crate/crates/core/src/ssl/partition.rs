use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::physics::KSpaceData;

pub const RHO_MIN: f64 = 0.2;
pub const RHO_MAX: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    /// Fraction of the non-center sampled lines kept.
    pub rho: f64,
    pub seed: u64,
    pub keep_center: bool,
}

impl PartitionSpec {
    pub fn new(rho: f64, seed: u64) -> Self {
        Self {
            rho,
            seed,
            keep_center: true,
        }
    }
}

/// Sub-samples whole phase-encode lines of `k`: the center block (when
/// `keep_center`) plus `round(rho * n)` of the `n` remaining sampled lines,
/// drawn uniformly without replacement.
pub fn partition(k: &KSpaceData, spec: &PartitionSpec) -> Result<KSpaceData> {
    if !(RHO_MIN..=RHO_MAX).contains(&spec.rho) {
        return Err(Error::invalid(
            "partition",
            format!("rho must lie in [{RHO_MIN}, {RHO_MAX}], got {}", spec.rho),
        ));
    }
    let mask = k.mask();
    if mask.is_empty() {
        return Err(Error::invalid("partition", "parent mask is empty"));
    }
    let center = mask.center_lines();
    let (fixed, free): (Vec<usize>, Vec<usize>) = if spec.keep_center {
        mask.line_set().iter().partition(|l| center.contains(l))
    } else {
        (Vec::new(), mask.line_set().to_vec())
    };
    let keep = (spec.rho * free.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut lines = fixed;
    lines.extend(sample(&mut rng, free.len(), keep).into_iter().map(|i| free[i]));
    k.restrict(mask.with_lines(lines)?)
}
