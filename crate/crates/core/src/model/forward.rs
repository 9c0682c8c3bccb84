//! Forward pass of the hierarchical encoder and its two classifier heads.
//!
//! Tokens are embedded, each post is encoded by a stacked BiLSTM into the
//! joined final states of its top layer, the post vectors are encoded in
//! time order by the event-level BiLSTM, and two linear heads score the
//! event vector and the last post vector.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::layout::{self, lstm_prefix};
use crate::model::{Mode, ModelConfig, ModelInput, PostHead};
use crate::pheme::Label;
use crate::scalar::Scalar;
use crate::tensor::{bilstm_sequence, softmax_ce_values, LstmCellParams, ParamStore, Tape, Var};

/// Dropout source for training; `None` means evaluation mode.
pub type Dropout<'r> = Option<&'r mut dyn RngCore>;

fn bind_stack<T: Scalar>(
    tape: &mut Tape<'_, T>,
    stack: &str,
    layers: usize,
) -> Result<Vec<(LstmCellParams, LstmCellParams)>> {
    (0..layers)
        .map(|l| {
            Ok((
                LstmCellParams::bind(tape, &lstm_prefix(stack, l, false))?,
                LstmCellParams::bind(tape, &lstm_prefix(stack, l, true))?,
            ))
        })
        .collect()
}

fn maybe_dropout<T: Scalar>(tape: &mut Tape<'_, T>, v: Var, rate: f64, rng: &mut Dropout<'_>) -> Result<Var> {
    match rng {
        Some(r) if rate > 0.0 => tape.dropout(v, rate, &mut **r),
        _ => Ok(v),
    }
}

/// Embedding lookup, one vector per token id.
pub fn embed<T: Scalar>(tape: &mut Tape<'_, T>, ids: &[usize]) -> Result<Vec<Var>> {
    if ids.is_empty() {
        return Err(Error::EmptySequence("token sequence"));
    }
    ids.iter().map(|&id| tape.gather(layout::EMBEDDING, id)).collect()
}

/// Post vector of length `2·hidden`: joined final states of the top
/// post-level layer, with dropout when training.
pub fn encode_post<T: Scalar>(
    tape: &mut Tape<'_, T>,
    ids: &[usize],
    mask: &[bool],
    config: &ModelConfig,
    rng: &mut Dropout<'_>,
) -> Result<Var> {
    let layers = bind_stack(tape, "post", config.post_layers)?;
    let xs = embed(tape, ids)?;
    let v = bilstm_sequence(tape, &xs, &layers, mask)?;
    maybe_dropout(tape, v, config.dropout_rate, rng)
}

/// Event vector of length `2·hidden` from the event-level BiLSTM over post
/// vectors, with dropout when training.
pub fn encode_event<T: Scalar>(
    tape: &mut Tape<'_, T>,
    post_vectors: &[Var],
    mask: &[bool],
    config: &ModelConfig,
    rng: &mut Dropout<'_>,
) -> Result<Var> {
    if post_vectors.is_empty() {
        return Err(Error::EmptySequence("event has no post vectors"));
    }
    let layers = bind_stack(tape, "event", config.event_layers)?;
    let v = bilstm_sequence(tape, post_vectors, &layers, mask)?;
    maybe_dropout(tape, v, config.dropout_rate, rng)
}

/// `W·vec + b`.
pub fn classify<T: Scalar>(tape: &mut Tape<'_, T>, vec: Var, w: &str, b: &str) -> Result<Var> {
    let w = tape.param(w)?;
    let b = tape.param(b)?;
    let z = tape.matmul(w, vec)?;
    tape.add(z, b)
}

/// Everything one forward pass produced, with the tape for backward.
pub struct ForwardResult<'p, T: Scalar> {
    pub tape: Tape<'p, T>,
    pub event_logits: Var,
    /// Post-head logits of the last real post; absent in `FLAT` mode.
    pub post_logits: Option<Var>,
    /// Post-head logits of every post, filled only for [`PostHead::Mean`].
    pub all_post_logits: Vec<Var>,
    /// One vector per real post, in input order; empty in `FLAT` mode.
    pub post_vectors: Vec<Var>,
    pub event_vector: Var,
    post_head: PostHead,
}

/// Scalar loss nodes on a [`ForwardResult`]'s tape.
#[derive(Clone, Copy, Debug)]
pub struct Losses {
    pub event: Var,
    pub post: Option<Var>,
}

impl<'p, T: Scalar> ForwardResult<'p, T> {
    pub fn event_logit_values(&self) -> &[T] {
        self.tape.value(self.event_logits)
    }

    pub fn post_logit_values(&self) -> Option<&[T]> {
        self.post_logits.map(|v| self.tape.value(v))
    }

    /// Records both cross-entropy losses against the event label, which every
    /// post shares.
    pub fn losses(&mut self, label: Label) -> Result<Losses> {
        let y = label.index();
        let event = self.tape.softmax_cross_entropy(self.event_logits, y)?;
        let post = match (self.post_head, self.post_logits) {
            (_, None) => None,
            (PostHead::Last, Some(z)) => Some(self.tape.softmax_cross_entropy(z, y)?),
            (PostHead::Mean, Some(_)) => {
                let parts = self
                    .all_post_logits
                    .clone()
                    .into_iter()
                    .map(|z| self.tape.softmax_cross_entropy(z, y))
                    .collect::<Result<Vec<_>>>()?;
                let n = parts.len();
                let total = self.tape.add_n(&parts)?;
                Some(self.tape.scale(total, T::one() / T::of(n as f64)))
            }
        };
        Ok(Losses { event, post })
    }
}

/// `(L_event, L_post)` as plain numbers.
pub fn loss<T: Scalar>(fr: &mut ForwardResult<'_, T>, label: Label) -> Result<(T, Option<T>)> {
    let l = fr.losses(label)?;
    Ok((fr.tape.scalar(l.event), l.post.map(|p| fr.tape.scalar(p))))
}

/// Runs the model on one (possibly padded) event.
pub fn forward_event<'p, T: Scalar>(
    params: &'p ParamStore<T>,
    config: &ModelConfig,
    input: &ModelInput,
    mut rng: Dropout<'_>,
) -> Result<ForwardResult<'p, T>> {
    if input.tokens.len() != input.post_mask.len() || input.tokens.len() != input.token_mask.len() {
        return Err(Error::ShapeMismatch {
            op: "event input masks",
            left: vec![input.tokens.len()],
            right: vec![input.post_mask.len(), input.token_mask.len()],
        });
    }
    let real: Vec<usize> = (0..input.tokens.len()).filter(|&i| input.post_mask[i]).collect();
    if real.is_empty() {
        return Err(Error::EmptySequence("event has no unmasked post"));
    }
    let mut tape = Tape::new(params);

    if config.mode == Mode::Flat {
        let mut ids = Vec::new();
        let mut mask = Vec::new();
        for &i in &real {
            ids.extend_from_slice(&input.tokens[i]);
            mask.extend_from_slice(&input.token_mask[i]);
        }
        let event_vector = encode_post(&mut tape, &ids, &mask, config, &mut rng)?;
        let event_logits = classify(&mut tape, event_vector, layout::CLF_EVENT_W, layout::CLF_EVENT_B)?;
        return Ok(ForwardResult {
            tape,
            event_logits,
            post_logits: None,
            all_post_logits: Vec::new(),
            post_vectors: Vec::new(),
            event_vector,
            post_head: config.post_head,
        });
    }

    if config.mode == Mode::PostOnly && real.len() != 1 {
        return Err(Error::Config(format!(
            "POST_ONLY scores single-post events, got {} posts; split the event first",
            real.len()
        )));
    }

    let mut post_vectors = Vec::with_capacity(real.len());
    for &i in &real {
        post_vectors.push(encode_post(&mut tape, &input.tokens[i], &input.token_mask[i], config, &mut rng)?);
    }
    let mask = vec![true; post_vectors.len()];
    let event_vector = encode_event(&mut tape, &post_vectors, &mask, config, &mut rng)?;
    let event_logits = classify(&mut tape, event_vector, layout::CLF_EVENT_W, layout::CLF_EVENT_B)?;

    let mut all_post_logits = Vec::new();
    let last = *post_vectors.last().expect("at least one post");
    let post_logits = match config.post_head {
        PostHead::Last => classify(&mut tape, last, layout::CLF_POST_W, layout::CLF_POST_B)?,
        PostHead::Mean => {
            for &v in &post_vectors {
                all_post_logits.push(classify(&mut tape, v, layout::CLF_POST_W, layout::CLF_POST_B)?);
            }
            *all_post_logits.last().expect("at least one post")
        }
    };

    Ok(ForwardResult {
        tape,
        event_logits,
        post_logits: Some(post_logits),
        all_post_logits,
        post_vectors,
        event_vector,
        post_head: config.post_head,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub p_rumor: f64,
}

/// Evaluation-mode event-head prediction. Exact ties go to nonrumor.
pub fn predict<T: Scalar>(params: &ParamStore<T>, config: &ModelConfig, input: &ModelInput) -> Result<Prediction> {
    let fr = forward_event(params, config, input, None)?;
    let (_, probs) = softmax_ce_values(fr.event_logit_values(), 0)?;
    let p = probs.data();
    let label = if p[1] > p[0] { Label::Rumor } else { Label::Nonrumor };
    Ok(Prediction {
        label,
        p_rumor: p[1].to_f64_lossy(),
    })
}
