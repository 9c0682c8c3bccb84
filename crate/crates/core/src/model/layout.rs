//! Parameter names, shapes and initialisation for every model variant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::{uniform, LstmCellParams, ParamStore, Tensor};

pub const EMBEDDING: &str = "embedding.E";
pub const CLF_POST_W: &str = "clf_post.W_p";
pub const CLF_POST_B: &str = "clf_post.b_p";
pub const CLF_EVENT_W: &str = "clf_event.W_e";
pub const CLF_EVENT_B: &str = "clf_event.b_e";

/// Name prefix of a bidirectional layer: `post.l0.fwd`, `event.l0.bwd`, ...
pub fn lstm_prefix(stack: &str, layer: usize, backward: bool) -> String {
    format!("{stack}.l{layer}.{}", if backward { "bwd" } else { "fwd" })
}

/// Every parameter name with its shape, in store order.
pub fn param_shapes(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = vec![(EMBEDDING.to_string(), vec![c.vocab_size, c.embed_dim])];
    let h = c.hidden_dim;
    let mut stack = |name: &str, layers: usize, first_in: usize| {
        for l in 0..layers {
            let d_in = if l == 0 { first_in } else { 2 * h };
            for backward in [false, true] {
                let [ih, hh, b] = LstmCellParams::names(&lstm_prefix(name, l, backward));
                out.push((ih, vec![4 * h, d_in]));
                out.push((hh, vec![4 * h, h]));
                out.push((b, vec![4 * h]));
            }
        }
    };
    stack("post", c.post_layers, c.embed_dim);
    stack("event", c.event_layers, 2 * h);
    out.push((CLF_POST_W.into(), vec![c.num_classes, 2 * h]));
    out.push((CLF_POST_B.into(), vec![c.num_classes]));
    out.push((CLF_EVENT_W.into(), vec![c.num_classes, 2 * h]));
    out.push((CLF_EVENT_B.into(), vec![c.num_classes]));
    out
}

/// Seeded initialisation: every matrix uniform in `±1/√hidden`, zero
/// biases except LSTM forget gates (1.0).
pub fn init_params<T: Scalar>(c: &ModelConfig, seed: u64) -> Result<ParamStore<T>> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (c.hidden_dim as f64).sqrt();
    let mut store = ParamStore::new();
    store.insert(EMBEDDING, uniform(&[c.vocab_size, c.embed_dim], bound, &mut rng));
    for (stack, layers, first_in) in [("post", c.post_layers, c.embed_dim), ("event", c.event_layers, 2 * c.hidden_dim)] {
        for l in 0..layers {
            let d_in = if l == 0 { first_in } else { 2 * c.hidden_dim };
            for backward in [false, true] {
                LstmCellParams::init(&mut store, &lstm_prefix(stack, l, backward), d_in, c.hidden_dim, &mut rng);
            }
        }
    }
    let clf = [c.num_classes, 2 * c.hidden_dim];
    store.insert(CLF_POST_W, uniform(&clf, bound, &mut rng));
    store.insert(CLF_POST_B, Tensor::zeros(&[c.num_classes]));
    store.insert(CLF_EVENT_W, uniform(&clf, bound, &mut rng));
    store.insert(CLF_EVENT_B, Tensor::zeros(&[c.num_classes]));
    Ok(store)
}

/// Checks that `params` holds exactly the tensors `c` calls for.
pub fn validate_params<T: Scalar>(params: &ParamStore<T>, c: &ModelConfig) -> Result<()> {
    let want = param_shapes(c);
    if want.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors for this configuration, found {}",
            want.len(),
            params.len()
        )));
    }
    for (name, shape) in want {
        let t = params
            .get(&name)
            .map_err(|_| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape() != shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?}, configuration needs {shape:?}",
                t.shape()
            )));
        }
    }
    Ok(())
}

/// Parameters the post-head loss can reach: embedding, post-level stack and
/// post classifier.
pub fn in_post_branch(name: &str) -> bool {
    name.starts_with("embedding.") || name.starts_with("post.") || name.starts_with("clf_post.")
}

/// Parameters updated from the event loss: everything but the post
/// classifier.
pub fn in_event_branch(name: &str) -> bool {
    !name.starts_with("clf_post.")
}
