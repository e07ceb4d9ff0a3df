use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{loss_total, LossBreakdown, LossWeights};
use super::partition::{partition, PartitionSpec, RHO_MAX, RHO_MIN};
use crate::error::{Error, Result};
use crate::metrics::SsimParams;
use crate::model::{model_forward, ModelParams};
use crate::physics::{CoilSensitivities, KSpaceData, Physics};
use crate::tensor::{backward, Tape};

/// One training item: under-sampled k-space and, for multi-coil data, the
/// coil maps used by its operator.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub kspace: KSpaceData,
    pub sens: Option<CoilSensitivities>,
}

impl Sample {
    pub fn physics(&self) -> Result<Physics> {
        Physics::for_kspace(&self.kspace, self.sens.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub adam: AdamConfig,
    /// Total epochs; a resumed run continues up to this count.
    pub epochs: usize,
    pub batch: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub seed: u64,
    pub ssim: SsimParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            epochs: 1,
            batch: 2,
            rho_min: RHO_MIN,
            rho_max: RHO_MAX,
            seed: 0,
            ssim: SsimParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.adam.validate()?;
        if self.batch == 0 {
            return Err(Error::invalid("train", "batch must be positive"));
        }
        if !(RHO_MIN <= self.rho_min && self.rho_min <= self.rho_max && self.rho_max <= RHO_MAX) {
            return Err(Error::invalid(
                "train",
                format!(
                    "need {RHO_MIN} <= rho_min <= rho_max <= {RHO_MAX}, got [{}, {}]",
                    self.rho_min, self.rho_max
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: u64,
    pub losses: LossBreakdown,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam: AdamState,
    pub epochs_done: usize,
    pub history: Vec<HistoryRow>,
}

impl TrainState {
    pub fn new(params: ModelParams) -> Self {
        Self {
            adam: AdamState::new(&params),
            params,
            epochs_done: 0,
            history: Vec::new(),
        }
    }
}

/// Gradients of `L_d` for one sample and partition, in
/// [`ModelParams::named`] order.
///
/// With `live_full_branch` the full-input reconstruction is recorded on the
/// same tape as the partitioned branch; otherwise it is computed from
/// detached parameters. Both give the same gradients because the loss only
/// sees that branch through a stop-gradient.
pub fn sample_gradients(
    sample: &Sample,
    params: &ModelParams,
    spec: &PartitionSpec,
    weights: &LossWeights,
    ssim: &SsimParams,
    live_full_branch: bool,
) -> Result<(Vec<Vec<f64>>, LossBreakdown)> {
    let physics = sample.physics()?;
    let k_p = partition(&sample.kspace, spec)?;
    let physics_p = physics.with_mask(k_p.mask());
    let k = sample.kspace.samples();

    let tape = Tape::new();
    let leaves = params.on_tape(&tape);
    let x_rec = if live_full_branch {
        model_forward(k, &leaves, &physics)?
    } else {
        model_forward(k, &params.detached(), &physics)?
    };
    let x_rec_p = model_forward(k_p.samples(), &leaves, &physics_p)?;
    let (l_d, breakdown) = loss_total(&x_rec_p, &x_rec, k, weights, &physics, ssim)?;
    let grads = backward(&l_d)?;
    let flat = leaves
        .tensors()
        .into_iter()
        .map(|t| {
            grads
                .raw(t)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.data().len()])
        })
        .collect();
    Ok((flat, breakdown))
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Runs epochs `state.epochs_done .. cfg.epochs`. Each epoch shuffles the
/// dataset and draws a fresh `rho` and partition per sample from a stream
/// keyed by `(seed, epoch)`, so a resumed run matches an uninterrupted one.
pub fn train(dataset: &[Sample], state: TrainState, cfg: &TrainConfig) -> Result<TrainState> {
    train_with(dataset, state, cfg, |_| Ok(()))
}

/// [`train`] with a callback after every epoch (checkpointing, logging).
pub fn train_with(
    dataset: &[Sample],
    mut state: TrainState,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainState) -> Result<()>,
) -> Result<TrainState> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("train", "dataset is empty"));
    }
    while state.epochs_done < cfg.epochs {
        let mut rng = epoch_rng(cfg.seed, state.epochs_done);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let start = Instant::now();
            let mut sum: Option<Vec<Vec<f64>>> = None;
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let rho = rng.random_range(cfg.rho_min..=cfg.rho_max);
                let spec = PartitionSpec::new(rho, rng.random());
                let (g, l) =
                    sample_gradients(&dataset[i], &state.params, &spec, &cfg.weights, &cfg.ssim, false)?;
                losses.push(l);
                match &mut sum {
                    None => sum = Some(g),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
                        }
                    }
                }
            }
            let mut grads = sum.unwrap_or_default();
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= inv);
            adam_step(&mut state.params, &grads, &mut state.adam, &cfg.adam)?;
            state.history.push(HistoryRow {
                step: state.adam.step,
                losses: LossBreakdown::mean(&losses),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        state.epochs_done += 1;
        on_epoch(&state)?;
    }
    Ok(state)
}

/// `step,L_k_rev,L_k_reg,L_img_rev,L_img_reg,L_d,wall_ms`.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("step,L_k_rev,L_k_reg,L_img_rev,L_img_reg,L_d,wall_ms\n");
    for r in rows {
        let l = &r.losses;
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{:.3}",
            r.step, l.l_k_rev, l.l_k_reg, l.l_img_rev, l.l_img_reg, l.l_d, r.wall_ms
        );
    }
    s
}
