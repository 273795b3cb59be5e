//! Fixed-architecture numeric kernels with analytic backward passes, the
//! Adam optimiser, and a finite-difference gradient checker.

mod attention;
pub mod gradcheck;
mod gru;
mod layers;
mod loss;
mod matrix;
mod param;

pub use attention::{AttentionCache, BlockCache, SelfAttention, TransformerBlock};
pub use gradcheck::{finite_difference_check, Fragment, GradCheckReport, TensorCheck};
pub use gru::{GruCache, GruLayer};
pub use layers::{
    embedding_backward, embedding_forward, FeedForward, FeedForwardCache, LayerNorm,
    LayerNormCache, Linear,
};
pub use loss::{softmax, softmax_cross_entropy};
pub use matrix::{dot, Matrix};
pub use param::{AdamConfig, Parameter};
