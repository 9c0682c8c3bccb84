//! The hierarchical network, its ablation variants and checkpoints.

mod checkpoint;
mod config;
mod forward;
mod input;
mod layout;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{Mode, ModelConfig, PostHead};
pub use forward::{
    classify, embed, encode_event, encode_post, forward_event, loss, predict, Dropout, ForwardResult, Losses,
    Prediction,
};
pub use input::{EncodedEvent, ModelInput};
pub use layout::{
    in_event_branch, in_post_branch, init_params, lstm_prefix, param_shapes, validate_params, CLF_EVENT_B,
    CLF_EVENT_W, CLF_POST_B, CLF_POST_W, EMBEDDING,
};
