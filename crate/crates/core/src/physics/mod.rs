//! Imaging physics: Cartesian line masks, the acquisition operators
//! `M F` and `M F S` with their adjoints, coil maps, phantoms and noise.

mod coils;
mod mask;
mod noise;
mod operator;
mod phantom;

pub use coils::{estimate_sensitivities, synthetic_sensitivities, CoilSensitivities, SUPPORT_THRESHOLD};
pub use mask::{
    center_block, center_count_for, line_budget, make_mask, MaskPattern, SamplingMask, ACCELERATIONS,
    CENTER_FRACTION,
};
pub use noise::add_kspace_noise;
pub use operator::{
    adjoint_multi, adjoint_single, forward_multi, forward_single, zero_filled, KSpaceData, Physics,
};
pub use phantom::{apply_smooth_phase, make_phantom, PhantomKind};
