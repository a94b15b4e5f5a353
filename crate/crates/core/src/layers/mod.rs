//! The layers the network is assembled from: standard / depthwise-separable /
//! dilated / grouped / 1x1 / transposed convolutions, batch normalization,
//! max pooling, global average pooling, dense, activations, dropout, channel
//! concatenation and channel shuffle-and-split.
//!
//! Every layer is a pure function of (inputs, weights, mode); the only
//! stateful pieces are batch-norm running statistics and the dropout RNG,
//! which are confined to the owning training thread.

mod conv;
mod dense;
mod dropout;
mod norm;
mod pool;
mod shuffle;

pub use conv::{conv2d, transposed_conv2d, Conv2d, ConvSpec, DwsConv2d, Padding, TransposedConv2d};
pub use dense::Dense;
pub use dropout::Dropout;
pub use norm::BatchNorm;
pub use pool::{global_avg_pool, maxpool2x2};
pub use shuffle::{channel_shuffle_split, channel_unshuffle};

// Activations are primitive tape ops; re-exported here so model code reads
// uniformly.
pub use crate::tensor::ops::{concat_channels, relu, sigmoid, softmax_rows as softmax};

/// Whether stateful layers behave as in training (batch statistics, dropout
/// masks) or inference (running statistics, identity dropout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
