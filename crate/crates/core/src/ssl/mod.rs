//! Re-visible dual-domain self-supervised training: line partitioning of
//! the measured k-space, the k-space and image loss terms, Adam, and the
//! training loop.

mod adam;
mod check;
mod loss;
mod partition;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use check::{generic_point, loss_gradcheck};
pub use loss::{
    l1_kspace, loss_img, loss_img_reg, loss_img_rev, loss_k_reg, loss_k_rev, loss_total, reference_image,
    ssim_tensor, LossBreakdown, LossWeights,
};
pub use partition::{partition, PartitionSpec, RHO_MAX, RHO_MIN};
pub use train::{
    history_csv, sample_gradients, train, train_with, HistoryRow, Sample, TrainConfig, TrainState,
};
