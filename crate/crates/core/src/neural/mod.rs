//! Dense feed-forward networks with exact backpropagation.
//!
//! Only fixed layer stacks are supported: each [`DenseLayer`] is an affine map
//! followed by an element-wise [`Activation`]. [`Mlp::forward`] records a
//! [`ForwardCache`] that [`Mlp::backward`] consumes to produce gradients for
//! every weight and bias, plus the gradient with respect to the input so that
//! networks can be chained (encoder into decoder).

mod activation;
mod gradcheck;
mod layer;
mod mlp;
mod optim;

pub use activation::Activation;
pub use gradcheck::{grad_check, GradCheckReport, GRAD_CHECK_FLOOR, GRAD_CHECK_STEP};
pub use layer::DenseLayer;
pub use mlp::{ForwardCache, Gradients, LayerGradients, Mlp};
pub use optim::OptimizerState;
