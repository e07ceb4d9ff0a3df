use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::ops::softplus_inverse;
use crate::tensor::{DType, Tape, Tensor};

/// Shape hyperparameters of the unfolded network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Number of unfolded stages `K`.
    pub stages: usize,
    /// Channels at the finest encoder level; doubled per level.
    pub base_channels: usize,
    /// Encoder / decoder depth.
    pub levels: usize,
    pub height: usize,
    pub width: usize,
    pub slope: f64,
    pub norm_eps: f64,
    pub init_tau: f64,
    pub init_sigma: f64,
    pub init_theta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            stages: 4,
            base_channels: 8,
            levels: 4,
            height: 64,
            width: 64,
            slope: 0.2,
            norm_eps: 1e-5,
            init_tau: 0.5,
            init_sigma: 0.5,
            init_theta: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid("model", msg));
        if self.base_channels == 0 {
            return bad("base_channels must be positive".into());
        }
        if self.levels == 0 {
            return bad("levels must be positive".into());
        }
        let min = 1usize << self.levels;
        for (name, d) in [("height", self.height), ("width", self.width)] {
            if !crate::tensor::is_power_of_two(d) || d < min {
                return bad(format!(
                    "{name} {d} must be a power of two >= {min} for {} levels",
                    self.levels
                ));
            }
        }
        if !(self.norm_eps > 0.0) {
            return bad(format!("norm_eps must be > 0, got {}", self.norm_eps));
        }
        for (name, v) in [
            ("init_tau", self.init_tau),
            ("init_sigma", self.init_sigma),
            ("init_theta", self.init_theta),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }

    /// Number of learnable scalars (a complex filter entry counts twice).
    pub fn parameter_count(&self) -> usize {
        let c = |l: usize| self.channels(l);
        let mut per_stage = 3 + 2 * c(0) + 2;
        for l in 0..self.levels {
            let cin = if l == 0 { 2 } else { c(l - 1) };
            let (h, w) = (self.height >> l, self.width >> l);
            per_stage += c(l) * cin * 9 + 2 * c(l); // spatial conv + norm
            per_stage += 2 * cin * h * w; // global filter
            per_stage += c(l) * (c(l) + cin) + c(l); // fusion
            per_stage += c(l) * cin; // residual projection
            let below = if l + 1 == self.levels { c(l) } else { c(l + 1) };
            per_stage += below * c(l) * 4; // upsampling
            per_stage += c(l) * 2 * c(l) * 9 + 2 * c(l); // conv1 + norm1
            per_stage += c(l) * c(l) * 9 + 2 * c(l); // conv2 + norm2
        }
        per_stage * self.stages
    }
}

#[derive(Clone, Debug)]
pub struct SffeParams {
    pub spatial_weight: Tensor,
    pub norm_gamma: Tensor,
    pub norm_beta: Tensor,
    /// Complex `C_in x H_l x W_l`.
    pub global_filter: Tensor,
    pub fuse_weight: Tensor,
    pub fuse_bias: Tensor,
    pub proj_weight: Tensor,
}

#[derive(Clone, Debug)]
pub struct DecoderParams {
    pub up_weight: Tensor,
    pub conv1_weight: Tensor,
    pub norm1_gamma: Tensor,
    pub norm1_beta: Tensor,
    pub conv2_weight: Tensor,
    pub norm2_gamma: Tensor,
    pub norm2_beta: Tensor,
}

#[derive(Clone, Debug)]
pub struct ProxNetParams {
    pub encoder: Vec<SffeParams>,
    /// Indexed by level; applied from the deepest level up.
    pub decoder: Vec<DecoderParams>,
    pub out_weight: Tensor,
    pub out_bias: Tensor,
}

/// Step sizes are stored unconstrained and mapped through softplus.
#[derive(Clone, Debug)]
pub struct StageParams {
    pub tau_raw: Tensor,
    pub sigma_raw: Tensor,
    pub theta_raw: Tensor,
    pub proxnet: ProxNetParams,
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub stages: Vec<StageParams>,
}

fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::from_parts(shape.to_vec(), DType::Real, data)
}

/// He-uniform bound for a layer followed by leaky ReLU.
fn he_bound(fan_in: usize, slope: f64) -> f64 {
    (6.0 / ((1.0 + slope * slope) * fan_in as f64)).sqrt()
}

fn linear_bound(fan_in: usize) -> f64 {
    (3.0 / fan_in as f64).sqrt()
}

impl ProxNetParams {
    fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = |l: usize| cfg.channels(l);
        let mut encoder = Vec::with_capacity(cfg.levels);
        let mut decoder = Vec::with_capacity(cfg.levels);
        for l in 0..cfg.levels {
            let cin = if l == 0 { 2 } else { c(l - 1) };
            let co = c(l);
            let (h, w) = (cfg.height >> l, cfg.width >> l);
            let filter: Vec<f64> = (0..cin * h * w)
                .flat_map(|_| {
                    [
                        1.0 + 0.05 * rng.random_range(-1.0..1.0),
                        0.05 * rng.random_range(-1.0..1.0),
                    ]
                })
                .collect();
            encoder.push(SffeParams {
                spatial_weight: uniform(&[co, cin, 3, 3], he_bound(cin * 9, cfg.slope), rng),
                norm_gamma: Tensor::full(&[co], 1.0),
                norm_beta: Tensor::zeros(&[co], DType::Real),
                global_filter: Tensor::from_parts(vec![cin, h, w], DType::Complex, filter),
                fuse_weight: uniform(&[co, co + cin, 1, 1], linear_bound(co + cin), rng),
                fuse_bias: Tensor::zeros(&[co], DType::Real),
                proj_weight: uniform(&[co, cin, 1, 1], linear_bound(cin), rng),
            });
        }
        for l in 0..cfg.levels {
            let co = c(l);
            let below = if l + 1 == cfg.levels { c(l) } else { c(l + 1) };
            decoder.push(DecoderParams {
                up_weight: uniform(&[below, co, 2, 2], linear_bound(below), rng),
                conv1_weight: uniform(&[co, 2 * co, 3, 3], he_bound(2 * co * 9, cfg.slope), rng),
                norm1_gamma: Tensor::full(&[co], 1.0),
                norm1_beta: Tensor::zeros(&[co], DType::Real),
                conv2_weight: uniform(&[co, co, 3, 3], he_bound(co * 9, cfg.slope), rng),
                norm2_gamma: Tensor::full(&[co], 1.0),
                norm2_beta: Tensor::zeros(&[co], DType::Real),
            });
        }
        ProxNetParams {
            encoder,
            decoder,
            // 1/sqrt(fan_in): a zero output layer blocks every upstream
            // gradient and stalls training for thousands of steps.
            out_weight: uniform(&[2, c(0), 1, 1], (c(0) as f64).sqrt().recip(), rng),
            out_bias: Tensor::zeros(&[2], DType::Real),
        }
    }

    fn fields(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (l, e) in self.encoder.iter().enumerate() {
            let p = format!("enc{l}");
            v.push((format!("{p}.spatial.weight"), &e.spatial_weight));
            v.push((format!("{p}.norm.gamma"), &e.norm_gamma));
            v.push((format!("{p}.norm.beta"), &e.norm_beta));
            v.push((format!("{p}.global_filter"), &e.global_filter));
            v.push((format!("{p}.fuse.weight"), &e.fuse_weight));
            v.push((format!("{p}.fuse.bias"), &e.fuse_bias));
            v.push((format!("{p}.proj.weight"), &e.proj_weight));
        }
        for (l, d) in self.decoder.iter().enumerate() {
            let p = format!("dec{l}");
            v.push((format!("{p}.up.weight"), &d.up_weight));
            v.push((format!("{p}.conv1.weight"), &d.conv1_weight));
            v.push((format!("{p}.norm1.gamma"), &d.norm1_gamma));
            v.push((format!("{p}.norm1.beta"), &d.norm1_beta));
            v.push((format!("{p}.conv2.weight"), &d.conv2_weight));
            v.push((format!("{p}.norm2.gamma"), &d.norm2_gamma));
            v.push((format!("{p}.norm2.beta"), &d.norm2_beta));
        }
        v.push(("out.weight".into(), &self.out_weight));
        v.push(("out.bias".into(), &self.out_bias));
        v
    }

    fn fields_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for e in &mut self.encoder {
            v.extend([
                &mut e.spatial_weight,
                &mut e.norm_gamma,
                &mut e.norm_beta,
                &mut e.global_filter,
                &mut e.fuse_weight,
                &mut e.fuse_bias,
                &mut e.proj_weight,
            ]);
        }
        for d in &mut self.decoder {
            v.extend([
                &mut d.up_weight,
                &mut d.conv1_weight,
                &mut d.norm1_gamma,
                &mut d.norm1_beta,
                &mut d.conv2_weight,
                &mut d.norm2_gamma,
                &mut d.norm2_beta,
            ]);
        }
        v.push(&mut self.out_weight);
        v.push(&mut self.out_bias);
        v
    }
}

impl StageParams {
    pub fn tau(&self) -> Result<Tensor> {
        crate::tensor::ops::softplus(&self.tau_raw)
    }

    pub fn sigma(&self) -> Result<Tensor> {
        crate::tensor::ops::softplus(&self.sigma_raw)
    }

    pub fn theta(&self) -> Result<Tensor> {
        crate::tensor::ops::softplus(&self.theta_raw)
    }
}

impl ModelParams {
    /// Seeded initialization.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stages = (0..config.stages)
            .map(|_| StageParams {
                tau_raw: Tensor::scalar(softplus_inverse(config.init_tau)),
                sigma_raw: Tensor::scalar(softplus_inverse(config.init_sigma)),
                theta_raw: Tensor::scalar(softplus_inverse(config.init_theta)),
                proxnet: ProxNetParams::init(config, &mut rng),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            stages,
        })
    }

    /// All tensors under canonical names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (k, s) in self.stages.iter().enumerate() {
            v.push((format!("stage{k}.tau"), &s.tau_raw));
            v.push((format!("stage{k}.sigma"), &s.sigma_raw));
            v.push((format!("stage{k}.theta"), &s.theta_raw));
            for (name, t) in s.proxnet.fields() {
                v.push((format!("stage{k}.prox.{name}"), t));
            }
        }
        v
    }

    /// Mutable tensors in the order of [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for s in &mut self.stages {
            v.extend([&mut s.tau_raw, &mut s.sigma_raw, &mut s.theta_raw]);
            v.extend(s.proxnet.fields_mut());
        }
        v
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    /// Copy with every tensor replaced by `f(name, tensor)`.
    pub fn map(&self, mut f: impl FnMut(&str, &Tensor) -> Tensor) -> Self {
        let names: Vec<String> = self.named().into_iter().map(|(n, _)| n).collect();
        let mut out = self.clone();
        for (t, name) in out.tensors_mut().into_iter().zip(&names) {
            *t = f(name, t);
        }
        out
    }

    /// Copy whose tensors are leaves on `tape`.
    pub fn on_tape(&self, tape: &Tape) -> Self {
        self.map(|_, t| tape.leaf(t))
    }

    pub fn detached(&self) -> Self {
        self.map(|_, t| t.detach())
    }

    /// Fills a freshly initialized model of `config` from named tensors.
    /// Every name must be present with the expected shape and dtype.
    pub fn from_named(config: &ModelConfig, mut tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        let template = Self::init(config, 0)?;
        let names: Vec<String> = template.named().into_iter().map(|(n, _)| n).collect();
        let mut out = template.clone();
        for (slot, name) in out.tensors_mut().into_iter().zip(&names) {
            let t = tensors
                .remove(name)
                .ok_or_else(|| Error::invalid("model", format!("missing parameter `{name}`")))?;
            if t.shape() != slot.shape() || t.dtype() != slot.dtype() {
                return Err(Error::invalid(
                    "model",
                    format!(
                        "parameter `{name}` has shape {:?} {:?}, expected {:?} {:?}",
                        t.shape(),
                        t.dtype(),
                        slot.shape(),
                        slot.dtype()
                    ),
                ));
            }
            *slot = t.detach();
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::invalid("model", format!("unexpected parameter `{extra}`")));
        }
        Ok(out)
    }
}
