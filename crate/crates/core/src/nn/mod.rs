//! Differentiable numeric primitives.
//!
//! Every layer exposes a forward pass and an explicit backward pass that
//! accumulates parameter gradients; there is no tape.

mod activation;
mod batchnorm;
mod conv;
mod gradcheck;
mod param;
mod real;
mod resample;
mod tensor;

pub use activation::{
    activation, channel_softmax, channel_softmax_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, sigmoid_scalar, Activation,
};
pub use batchnorm::{batch_norm, BatchNorm2d, BatchNormCache, Mode, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use conv::{conv2d, conv2d_backward, output_size, Conv2d, ConvGrads};
pub use gradcheck::{finite_difference_check, finite_difference_check_kinked, relative_error, GradCheckConfig, GradCheckReport};
pub use param::{count_layer_parameters, count_parameters, zero_grads, Param, Parameterized};
pub use real::Real;
pub use resample::{
    bicubic_resize, bilinear_upsample, bilinear_upsample_backward, cubic_kernel, resize_bilinear,
    resize_bilinear_backward, BICUBIC_A,
};
pub use tensor::{FeatureMap, Shape};
