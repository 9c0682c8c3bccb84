use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::Metrics;
use crate::model::{forward_event, validate_params, Checkpoint, EncodedEvent, Mode, ModelConfig, ModelInput};
use crate::pheme::{Event, Label};
use crate::scalar::Scalar;
use crate::tensor::{softmax_ce_values, ParamStore};
use crate::text::Vocabulary;

/// Encodes events into the units a mode classifies: whole events, or one
/// single-post event per post for `POST_ONLY`.
pub fn prepare_units(events: &[Event], vocab: &Vocabulary, config: &ModelConfig) -> Vec<EncodedEvent> {
    let encoded = events.iter().map(|e| EncodedEvent::encode(e, vocab, config));
    if config.mode == Mode::PostOnly {
        encoded.flat_map(|e| e.split_posts()).collect()
    } else {
        encoded.collect()
    }
}

/// Evaluation-mode outcome for one unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scored {
    pub truth: Label,
    pub predicted: Label,
    pub p_rumor: f64,
    pub loss_event: f64,
}

/// Scores every unit without dropout, in input order.
pub fn score_units<T: Scalar>(
    params: &ParamStore<T>,
    config: &ModelConfig,
    units: &[EncodedEvent],
) -> Result<Vec<Scored>> {
    units
        .par_iter()
        .map(|u| {
            let fr = forward_event(params, config, &ModelInput::from_encoded(u), None)?;
            let (loss, probs) = softmax_ce_values(fr.event_logit_values(), u.label.index())?;
            let p = probs.data();
            Ok(Scored {
                truth: u.label,
                predicted: if p[1] > p[0] { Label::Rumor } else { Label::Nonrumor },
                p_rumor: p[1].to_f64_lossy(),
                loss_event: loss.to_f64_lossy(),
            })
        })
        .collect()
}

pub fn metrics_of(scored: &[Scored]) -> Metrics {
    Metrics::from_pairs(scored.iter().map(|s| (s.truth, s.predicted)))
}

/// Checks that the checkpoint's vocabulary, configuration and tensors agree.
pub fn check_consistency<T: Scalar>(ckpt: &Checkpoint<T>) -> Result<()> {
    ckpt.config.validate()?;
    if ckpt.vocab.len() != ckpt.config.vocab_size {
        return Err(Error::Config(format!(
            "vocabulary has {} ids but the model expects {}",
            ckpt.vocab.len(),
            ckpt.config.vocab_size
        )));
    }
    validate_params(&ckpt.params, &ckpt.config)
}

/// Per-unit predictions of a checkpoint on raw events.
pub fn score_events<T: Scalar>(ckpt: &Checkpoint<T>, events: &[Event]) -> Result<Vec<Scored>> {
    check_consistency(ckpt)?;
    if events.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let units = prepare_units(events, &ckpt.vocab, &ckpt.config);
    score_units(&ckpt.params, &ckpt.config, &units)
}

/// Event-head metrics; `POST_ONLY` checkpoints are scored per post.
pub fn evaluate<T: Scalar>(ckpt: &Checkpoint<T>, events: &[Event]) -> Result<Metrics> {
    Ok(metrics_of(&score_events(ckpt, events)?))
}
