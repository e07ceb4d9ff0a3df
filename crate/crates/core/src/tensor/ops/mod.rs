//! The differentiable operation set.
//!
//! Every function returns a constant when none of its inputs is recorded
//! and otherwise appends one node with its adjoint rule to the inputs' tape.

mod complex;
mod elementwise;
mod filter;
mod nn;
mod reduce;

pub use complex::{
    apply_mask, channels_to_complex, coil_combine, coil_expand, complex_to_channels, fft2, ifft2, magnitude,
    real_part, to_complex,
};
pub use elementwise::{
    add, add_scalar, div, leaky_relu, mul, reshape, scale, soft_threshold, softplus, softplus_inverse,
    softplus_scalar, stop_gradient, sub,
};
pub use filter::separable_filter_valid;
pub use nn::{avg_pool2, concat_channels, conv2d, instance_norm, transpose_conv_up2};
pub use reduce::{mean, sum};
