//! Hierarchical BiLSTM rumor detection with a dual-branch, attenuated Adam
//! optimizer.
//!
//! The crate is generic over the floating-point [`Scalar`]; training uses
//! `f32` and gradient checks use `f64`. Concrete aliases for both live at the
//! crate root.

pub mod error;
pub mod harness;
pub mod model;
pub mod optim;
pub mod pheme;
pub mod scalar;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type ParamStore32 = tensor::ParamStore<f32>;
pub type ParamStore64 = tensor::ParamStore<f64>;
pub type Gradients32 = tensor::Gradients<f32>;
pub type Gradients64 = tensor::Gradients<f64>;
pub type AdamState32 = optim::AdamState<f32>;
pub type AdamState64 = optim::AdamState<f64>;
pub type Checkpoint32 = model::Checkpoint<f32>;
pub type Checkpoint64 = model::Checkpoint<f64>;
