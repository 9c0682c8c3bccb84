//! Dense tensors, the gradient tape and the recurrent primitives built on it.

mod array;
mod gradcheck;
mod lstm;
mod params;
mod tape;

pub use array::Tensor;
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use lstm::{bilstm_sequence, lstm_cell, LstmCellParams};
pub(crate) use lstm::uniform;
pub use params::{Grad, Gradients, ParamStore};
pub use tape::{softmax_ce_values, softmax_cross_entropy, Tape, Var};
