//! `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Unknown and repeated keys are rejected. Keys not mentioned keep their
//! defaults, and [`RunConfig::to_text`] writes every key.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::physics::{MaskPattern, ACCELERATIONS};
use crate::ssl::{AdamConfig, LossWeights, TrainConfig, RHO_MAX, RHO_MIN};

/// When to apply the data-consistency replacement after inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataConsistency {
    /// On for noiseless data, off when noise is added.
    Auto,
    On,
    Off,
}

impl DataConsistency {
    pub fn enabled(self, noise: f64) -> bool {
        match self {
            DataConsistency::Auto => noise == 0.0,
            DataConsistency::On => true,
            DataConsistency::Off => false,
        }
    }
}

impl Display for DataConsistency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DataConsistency::Auto => "auto",
            DataConsistency::On => "on",
            DataConsistency::Off => "off",
        })
    }
}

impl FromStr for DataConsistency {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(DataConsistency::Auto),
            "on" => Ok(DataConsistency::On),
            "off" => Ok(DataConsistency::Off),
            _ => Err(format!("expected auto, on or off, got `{s}`")),
        }
    }
}

/// Simulated acquisition applied to phantom datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub accel: u32,
    pub pattern: MaskPattern,
    /// 1 for single-coil; more uses synthetic sensitivity maps.
    pub coils: usize,
    /// Relative k-space noise level.
    pub noise: f64,
    pub data_consistency: DataConsistency,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self {
            accel: 4,
            pattern: MaskPattern::Random,
            coils: 1,
            noise: 0.0,
            data_consistency: DataConsistency::Auto,
        }
    }
}

/// Settings of the `L_d` gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckSettings {
    pub step: f64,
    /// Components checked per parameter tensor.
    pub entries: usize,
    pub tolerance: f64,
    pub rho: f64,
    pub seed: u64,
    /// Half-width of the uniform draw for the output layer.
    pub output_scale: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self {
            step: 1e-6,
            entries: 16,
            tolerance: 1e-5,
            rho: 0.5,
            seed: 0,
            output_scale: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub acquisition: Acquisition,
    pub gradcheck: GradCheckSettings,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        key: key.to_string(),
        msg: format!("cannot parse `{value}`: {e}"),
    })
}

fn check(ok: bool, key: &str, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            key: key.to_string(),
            msg: msg.into(),
        })
    }
}

impl RunConfig {
    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (m, t, a, g) = (&self.model, &self.train, &self.acquisition, &self.gradcheck);
        vec![
            ("stages", m.stages.to_string()),
            ("channels", m.base_channels.to_string()),
            ("levels", m.levels.to_string()),
            ("height", m.height.to_string()),
            ("width", m.width.to_string()),
            ("slope", m.slope.to_string()),
            ("norm_eps", m.norm_eps.to_string()),
            ("init_tau", m.init_tau.to_string()),
            ("init_sigma", m.init_sigma.to_string()),
            ("init_theta", m.init_theta.to_string()),
            ("init_seed", self.init_seed.to_string()),
            ("lambda", t.weights.lambda.to_string()),
            ("eta", t.weights.eta.to_string()),
            ("beta", t.weights.beta.to_string()),
            ("lr", t.adam.lr.to_string()),
            ("beta1", t.adam.beta1.to_string()),
            ("beta2", t.adam.beta2.to_string()),
            ("adam_eps", t.adam.eps.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch", t.batch.to_string()),
            ("rho_min", t.rho_min.to_string()),
            ("rho_max", t.rho_max.to_string()),
            ("seed", t.seed.to_string()),
            ("ssim_window", t.ssim.window.to_string()),
            ("ssim_sigma", t.ssim.sigma.to_string()),
            ("ssim_k1", t.ssim.k1.to_string()),
            ("ssim_k2", t.ssim.k2.to_string()),
            ("accel", a.accel.to_string()),
            ("pattern", a.pattern.to_string()),
            ("coils", a.coils.to_string()),
            ("noise", a.noise.to_string()),
            ("data_consistency", a.data_consistency.to_string()),
            ("gradcheck_step", g.step.to_string()),
            ("gradcheck_entries", g.entries.to_string()),
            ("gradcheck_tolerance", g.tolerance.to_string()),
            ("gradcheck_rho", g.rho.to_string()),
            ("gradcheck_seed", g.seed.to_string()),
            ("gradcheck_output_scale", g.output_scale.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (m, t, a, g) = (
            &mut self.model,
            &mut self.train,
            &mut self.acquisition,
            &mut self.gradcheck,
        );
        match key {
            "stages" => m.stages = parse(key, value)?,
            "channels" => m.base_channels = parse(key, value)?,
            "levels" => m.levels = parse(key, value)?,
            "height" => m.height = parse(key, value)?,
            "width" => m.width = parse(key, value)?,
            "slope" => m.slope = parse(key, value)?,
            "norm_eps" => m.norm_eps = parse(key, value)?,
            "init_tau" => m.init_tau = parse(key, value)?,
            "init_sigma" => m.init_sigma = parse(key, value)?,
            "init_theta" => m.init_theta = parse(key, value)?,
            "init_seed" => self.init_seed = parse(key, value)?,
            "lambda" => t.weights.lambda = parse(key, value)?,
            "eta" => t.weights.eta = parse(key, value)?,
            "beta" => t.weights.beta = parse(key, value)?,
            "lr" => t.adam.lr = parse(key, value)?,
            "beta1" => t.adam.beta1 = parse(key, value)?,
            "beta2" => t.adam.beta2 = parse(key, value)?,
            "adam_eps" => t.adam.eps = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch" => t.batch = parse(key, value)?,
            "rho_min" => t.rho_min = parse(key, value)?,
            "rho_max" => t.rho_max = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "ssim_window" => t.ssim.window = parse(key, value)?,
            "ssim_sigma" => t.ssim.sigma = parse(key, value)?,
            "ssim_k1" => t.ssim.k1 = parse(key, value)?,
            "ssim_k2" => t.ssim.k2 = parse(key, value)?,
            "accel" => a.accel = parse(key, value)?,
            "pattern" => a.pattern = parse(key, value)?,
            "coils" => a.coils = parse(key, value)?,
            "noise" => a.noise = parse(key, value)?,
            "data_consistency" => a.data_consistency = parse(key, value)?,
            "gradcheck_step" => g.step = parse(key, value)?,
            "gradcheck_entries" => g.entries = parse(key, value)?,
            "gradcheck_tolerance" => g.tolerance = parse(key, value)?,
            "gradcheck_rho" => g.rho = parse(key, value)?,
            "gradcheck_seed" => g.seed = parse(key, value)?,
            "gradcheck_output_scale" => g.output_scale = parse(key, value)?,
            _ => {
                return Err(Error::Config {
                    key: key.to_string(),
                    msg: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Parses and validates a configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: format!("line {}", i + 1),
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    key: key.to_string(),
                    msg: "given more than once".into(),
                });
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Range checks, reported against the offending key.
    pub fn validate(&self) -> Result<()> {
        let (m, t, a, g) = (&self.model, &self.train, &self.acquisition, &self.gradcheck);
        check(m.base_channels > 0, "channels", "must be positive")?;
        check(m.levels > 0, "levels", "must be positive")?;
        let min = 1usize << m.levels.min(30);
        for (key, d) in [("height", m.height), ("width", m.width)] {
            check(
                d.is_power_of_two() && d >= min,
                key,
                format!("must be a power of two >= 2^levels = {min}, got {d}"),
            )?;
        }
        check(m.slope >= 0.0 && m.slope < 1.0, "slope", "must lie in [0, 1)")?;
        check(m.norm_eps > 0.0, "norm_eps", "must be > 0")?;
        for (key, v) in [
            ("init_tau", m.init_tau),
            ("init_sigma", m.init_sigma),
            ("init_theta", m.init_theta),
        ] {
            check(v > 0.0 && v.is_finite(), key, "must be finite and > 0")?;
        }
        let LossWeights { lambda, eta, beta } = t.weights;
        for (key, v) in [("lambda", lambda), ("eta", eta), ("beta", beta)] {
            check(v >= 0.0 && v.is_finite(), key, "must be finite and >= 0")?;
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = t.adam;
        check(lr > 0.0 && lr.is_finite(), "lr", "must be finite and > 0")?;
        check((0.0..1.0).contains(&beta1), "beta1", "must lie in [0, 1)")?;
        check((0.0..1.0).contains(&beta2), "beta2", "must lie in [0, 1)")?;
        check(eps > 0.0, "adam_eps", "must be > 0")?;
        check(t.batch > 0, "batch", "must be positive")?;
        check(
            (RHO_MIN..=RHO_MAX).contains(&t.rho_min),
            "rho_min",
            format!("must lie in [{RHO_MIN}, {RHO_MAX}]"),
        )?;
        check(
            (t.rho_min..=RHO_MAX).contains(&t.rho_max),
            "rho_max",
            format!("must lie in [rho_min, {RHO_MAX}]"),
        )?;
        check(
            t.ssim.window % 2 == 1 && t.ssim.window <= m.height.min(m.width),
            "ssim_window",
            "must be odd and no larger than the image",
        )?;
        check(t.ssim.sigma > 0.0, "ssim_sigma", "must be > 0")?;
        check(t.ssim.k1 > 0.0, "ssim_k1", "must be > 0")?;
        check(t.ssim.k2 > 0.0, "ssim_k2", "must be > 0")?;
        check(
            ACCELERATIONS.contains(&a.accel),
            "accel",
            format!("must be one of {ACCELERATIONS:?}"),
        )?;
        check(a.coils > 0, "coils", "must be positive")?;
        check(
            a.noise >= 0.0 && a.noise.is_finite(),
            "noise",
            "must be finite and >= 0",
        )?;
        check(g.step > 0.0, "gradcheck_step", "must be > 0")?;
        check(g.entries > 0, "gradcheck_entries", "must be positive")?;
        check(g.tolerance > 0.0, "gradcheck_tolerance", "must be > 0")?;
        check(
            (RHO_MIN..=RHO_MAX).contains(&g.rho),
            "gradcheck_rho",
            format!("must lie in [{RHO_MIN}, {RHO_MAX}]"),
        )?;
        check(g.output_scale > 0.0, "gradcheck_output_scale", "must be > 0")?;
        Ok(())
    }
}
