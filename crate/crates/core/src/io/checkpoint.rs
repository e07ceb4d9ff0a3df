//! Model and training-state checkpoints.
//!
//! Records: `model.config` (stages, channels, levels, height, width, slope,
//! norm_eps, init_tau, init_sigma, init_theta), `param/<name>` for every
//! parameter, and for training state `train.epochs_done`, `adam.step`,
//! `adam.m/<name>`, `adam.v/<name>` and `train.history` (one row of
//! step, the seven loss terms and wall_ms per optimizer step).

use std::collections::BTreeMap;
use std::path::Path;

use super::container::TensorContainer;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::ssl::{AdamState, HistoryRow, LossBreakdown, TrainState};
use crate::tensor::Tensor;

const HISTORY_COLS: usize = 9;

fn count(t: &Tensor, what: &str) -> Result<u64> {
    let v = t.item()?;
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as u64)
    } else {
        Err(Error::invalid(
            "checkpoint",
            format!("{what} `{v}` is not a count"),
        ))
    }
}

fn config_tensor(c: &ModelConfig) -> Result<Tensor> {
    Tensor::real(
        &[10],
        vec![
            c.stages as f64,
            c.base_channels as f64,
            c.levels as f64,
            c.height as f64,
            c.width as f64,
            c.slope,
            c.norm_eps,
            c.init_tau,
            c.init_sigma,
            c.init_theta,
        ],
    )
}

fn config_from(t: &Tensor) -> Result<ModelConfig> {
    let v = t.data();
    if v.len() != 10 {
        return Err(Error::invalid("checkpoint", "model.config must hold 10 values"));
    }
    let int = |x: f64| {
        if x >= 0.0 && x.fract() == 0.0 && x < 1e9 {
            Ok(x as usize)
        } else {
            Err(Error::invalid(
                "checkpoint",
                format!("model.config entry `{x}` is not a count"),
            ))
        }
    };
    let cfg = ModelConfig {
        stages: int(v[0])?,
        base_channels: int(v[1])?,
        levels: int(v[2])?,
        height: int(v[3])?,
        width: int(v[4])?,
        slope: v[5],
        norm_eps: v[6],
        init_tau: v[7],
        init_sigma: v[8],
        init_theta: v[9],
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn params_to_container(params: &ModelParams) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.insert("model.config", &config_tensor(&params.config)?)?;
    for (name, t) in params.named() {
        c.insert(format!("param/{name}"), t)?;
    }
    Ok(c)
}

pub fn params_from_container(c: &TensorContainer) -> Result<ModelParams> {
    let cfg = config_from(c.require("model.config")?)?;
    let tensors: BTreeMap<String, Tensor> = c
        .records()
        .iter()
        .filter_map(|(n, t)| n.strip_prefix("param/").map(|n| (n.to_string(), t.clone())))
        .collect();
    ModelParams::from_named(&cfg, tensors)
}

pub fn save_params(params: &ModelParams, path: &Path) -> Result<()> {
    params_to_container(params)?.save(path)
}

/// Loads the parameters of a model or training checkpoint.
pub fn load_params(path: &Path) -> Result<ModelParams> {
    params_from_container(&TensorContainer::load(path)?)
}

pub fn state_to_container(state: &TrainState) -> Result<TensorContainer> {
    let mut c = params_to_container(&state.params)?;
    c.insert("train.epochs_done", &Tensor::scalar(state.epochs_done as f64))?;
    c.insert("adam.step", &Tensor::scalar(state.adam.step as f64))?;
    for (i, (name, _)) in state.params.named().into_iter().enumerate() {
        let (m, v) = (&state.adam.m[i], &state.adam.v[i]);
        c.insert(format!("adam.m/{name}"), &Tensor::real(&[m.len()], m.clone())?)?;
        c.insert(format!("adam.v/{name}"), &Tensor::real(&[v.len()], v.clone())?)?;
    }
    let mut rows = Vec::with_capacity(state.history.len() * HISTORY_COLS);
    for r in &state.history {
        let l = &r.losses;
        rows.extend([
            r.step as f64,
            l.l_k_rev,
            l.l_k_reg,
            l.l_img_rev,
            l.l_img_reg,
            l.l_k,
            l.l_img,
            l.l_d,
            r.wall_ms,
        ]);
    }
    c.insert(
        "train.history",
        &Tensor::real(&[state.history.len(), HISTORY_COLS], rows)?,
    )?;
    Ok(c)
}

pub fn state_from_container(c: &TensorContainer) -> Result<TrainState> {
    let params = params_from_container(c)?;
    let mut adam = AdamState::new(&params);
    adam.step = count(c.require("adam.step")?, "adam.step")?;
    for (i, (name, t)) in params.named().into_iter().enumerate() {
        for (slot, prefix) in [(&mut adam.m[i], "adam.m"), (&mut adam.v[i], "adam.v")] {
            let buf = c.require(&format!("{prefix}/{name}"))?;
            if buf.data().len() != t.data().len() {
                return Err(Error::invalid(
                    "checkpoint",
                    format!("{prefix}/{name} has the wrong length"),
                ));
            }
            *slot = buf.to_vec();
        }
    }
    let h = c.require("train.history")?;
    if h.shape().len() != 2 || h.shape()[1] != HISTORY_COLS {
        return Err(Error::invalid("checkpoint", "train.history must be N x 9"));
    }
    let history = h
        .data()
        .chunks_exact(HISTORY_COLS)
        .map(|r| HistoryRow {
            step: r[0] as u64,
            losses: LossBreakdown {
                l_k_rev: r[1],
                l_k_reg: r[2],
                l_img_rev: r[3],
                l_img_reg: r[4],
                l_k: r[5],
                l_img: r[6],
                l_d: r[7],
            },
            wall_ms: r[8],
        })
        .collect();
    Ok(TrainState {
        params,
        adam,
        epochs_done: count(c.require("train.epochs_done")?, "train.epochs_done")? as usize,
        history,
    })
}

pub fn save_state(state: &TrainState, path: &Path) -> Result<()> {
    state_to_container(state)?.save(path)
}

pub fn load_state(path: &Path) -> Result<TrainState> {
    state_from_container(&TensorContainer::load(path)?)
}
