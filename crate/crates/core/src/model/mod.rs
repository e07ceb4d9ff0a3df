//! The unfolded CP-PPA network: K stages, each a residual ProxNet primal
//! update followed by the analytic dual update, with learnable per-stage
//! step sizes.

mod params;
mod proxnet;
mod unrolled;

pub use params::{DecoderParams, ModelConfig, ModelParams, ProxNetParams, SffeParams, StageParams};
pub use proxnet::{proxnet_apply, sffe_block};
pub use unrolled::{data_consistency, model_forward, reconstruct, stage_forward};
