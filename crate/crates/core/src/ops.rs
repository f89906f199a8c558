//! Tensor kernels used by the forward pass. All kernels are pure and
//! deterministic: summation order is fixed, randomness is seeded.

mod conv;
mod elementwise;
mod pool;

pub use conv::{conv2d, conv2d_output_hw, transposed_conv2d, transposed_conv2d_output_hw, ConvParams};
pub use elementwise::{
    batchnorm_infer, channel_zero_pad, prelu, sigmoid, sigmoid_scalar, spatial_dropout, Mode,
    BATCHNORM_EPS, PRELU_INIT_SLOPE,
};
pub use pool::{max_unpool2x2, maxpool2x2_with_indices, PoolIndices};
