//! Minimal recurrent network engine: dense sequence matrices, LSTM layers,
//! dropout, repeat-vector, a time-distributed affine head, MSE loss,
//! exact reverse-mode gradients and the Adam optimizer.
//!
//! All parameters of a network live in one flat `Vec<f64>`; every layer owns
//! a contiguous block of it. Gradients use the same layout, which keeps the
//! optimizer, clipping, gradient checks and persistence layout-agnostic.

mod activation;
mod adam;
mod layers;
mod loss;
mod lstm;
mod matrix;
mod network;

pub use activation::{sigmoid, tanh_act};
pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use layers::{dropout_forward, repeat_vector, time_distributed_affine, DropoutSpec};
pub use loss::{mse_grad, mse_loss};
pub use lstm::{lstm_layer_forward, lstm_step, param_count, LstmLayerParams, LstmState};
pub use matrix::Matrix;
pub use network::{ForwardCache, LayerSpec, Mode, Network};

