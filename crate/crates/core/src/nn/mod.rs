// SPDX-License-Identifier: Apache-2.0

//! U-Net coefficient predictor with a per-instance regression head.
//!
//! Every layer has a hand-written backward pass. The encoder sees the temporal
//! power maps as a depth axis; its skip connections are summed over time before
//! they reach the 2D decoder. The decoder emits eight coefficients per tile,
//! which the head dots with each instance's feature vector.

mod adam;
mod augment;
mod head;
mod model;
pub mod ops;
mod tensor;
mod train;

pub use adam::{adam_step, flatten_grads, flatten_params, unflatten_params, AdamConfig, AdamState};
pub use augment::{symmetry_count, transform};
pub use head::{head_backward, predict_ir, predict_normalized, HeadInput};
pub use model::{
    padded_extent, CoefficientMap, ConvLayer, ForwardCache, Gradients, Model, ModelConfig, ModelInput, Variant, KERNEL,
};
pub use tensor::Tensor;
pub use train::{
    loss_and_grad, predict_sample, rmse, train, train_with, EpochRecord, LossGrad, Sample, TrainHyper, TrainLog,
};
