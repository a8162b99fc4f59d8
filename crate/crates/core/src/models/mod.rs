//! The two learned nonconformity backbones.
//!
//! [`VaeModel`] scores an input by how well its sampled reconstructions match
//! it; [`SvddModel`] scores by the squared distance of a bias-free
//! representation to a frozen center. Both are trained with the two-phase
//! schedule in [`TrainConfig`].

mod svdd;
mod train;
mod vae;

pub use svdd::{
    mirror_decoder, pretrain_autoencoder_then_copy, train_autoencoder, train_svdd, SvddModel, SvddTraining,
    CENTER_DEGENERACY_NORM, CENTER_DEGENERACY_OFFSET,
};
pub use train::TrainConfig;
pub use vae::{kl_divergence, train_vae, VaeLoss, VaeModel, VaeTraining};
