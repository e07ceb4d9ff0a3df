//! Compressed-sensing MRI reconstruction with a primal-dual (Chambolle-Pock)
//! solver, its deep-unfolded network counterpart, and re-visible
//! dual-domain self-supervised training.

pub mod classical;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod physics;
pub mod ssl;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{DType, Tensor};
