//! Seeded mini-batch training with validation-loss early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::evaluate::{metrics_of, prepare_units, score_units};
use crate::harness::Metrics;
use crate::model::{forward_event, init_params, Checkpoint, EncodedEvent, Mode, ModelConfig, ModelInput};
use crate::optim::{apply_multiloss_step, effective_beta, AdamConfig, AdamState, AttenuationSchedule};
use crate::pheme::Event;
use crate::scalar::Scalar;
use crate::tensor::{Gradients, ParamStore};
use crate::text::{normalize, Vocabulary, DEFAULT_MAX_VOCAB};

/// Posts per batching bucket; events are grouped by `posts / BUCKET_WIDTH`.
const BUCKET_WIDTH: usize = 5;
/// Stream offset separating the shuffle RNG from the per-event dropout RNGs.
const SHUFFLE_STREAM: u64 = 1 << 63;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict drop in validation event loss before stopping.
    pub patience: usize,
    pub seed: u64,
    /// `vocab_size` is replaced by the size of the vocabulary built from the
    /// training split; `mode` selects the variant.
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub schedule: AttenuationSchedule,
    pub max_vocab: usize,
    /// Stop as soon as validation accuracy reaches this value.
    pub target_val_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
            schedule: AttenuationSchedule::default(),
            max_vocab: DEFAULT_MAX_VOCAB,
            target_val_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn mode(&self) -> Mode {
        self.model.mode
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.max_vocab == 0 {
            return Err(Error::Config("max_vocab must be at least 1".into()));
        }
        Ok(())
    }
}

/// One completed epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_event: f64,
    /// Absent for `FLAT`, which has no post head.
    pub loss_post: Option<f64>,
    pub beta: f64,
    pub val_loss: f64,
    pub val: Metrics,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStop { best_epoch: usize },
    TargetReached { epoch: usize },
    /// A non-finite loss or gradient appeared during `epoch`.
    Diverged { epoch: usize },
}

pub struct TrainOutcome<T> {
    /// Parameters with the lowest validation event loss, or the initial
    /// parameters when no epoch completed.
    pub checkpoint: Checkpoint<T>,
    pub logs: Vec<EpochLog>,
    /// Mean evaluation-mode event loss on the training split before any
    /// update.
    pub initial_loss: f64,
    pub stop: StopReason,
}

/// Vocabulary over the normalised tokens of `events` only.
pub fn build_vocab(events: &[Event], max_vocab: usize) -> Vocabulary {
    let corpus: Vec<Vec<String>> = events
        .iter()
        .flat_map(|e| e.posts.iter().map(|p| normalize(&p.text)))
        .collect();
    Vocabulary::build(&corpus, max_vocab)
}

/// Dropout RNG for the unit at `position` of the training list in `epoch`;
/// independent of batching and of the mode.
fn unit_rng(seed: u64, epoch: usize, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | position as u64);
    rng
}

/// Seeded shuffle, stable grouping by post-count bucket, chunking, then a
/// shuffle of the batch order.
pub fn make_batches(units: &[EncodedEvent], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM | epoch as u64);
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|&i| units[i].posts.len() / BUCKET_WIDTH);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    batches.shuffle(&mut rng);
    batches
}

struct UnitStep<T> {
    loss_event: f64,
    loss_post: Option<f64>,
    grads_event: Gradients<T>,
    grads_post: Option<Gradients<T>>,
}

fn unit_step<T: Scalar>(
    params: &ParamStore<T>,
    config: &ModelConfig,
    unit: &EncodedEvent,
    rng: &mut ChaCha8Rng,
    want_post_grads: bool,
) -> Result<UnitStep<T>> {
    let mut fr = forward_event(params, config, &ModelInput::from_encoded(unit), Some(rng))?;
    let losses = fr.losses(unit.label)?;
    let loss_event = fr.tape.scalar(losses.event).to_f64_lossy();
    let loss_post = losses.post.map(|p| fr.tape.scalar(p).to_f64_lossy());
    let (grads_event, grads_post) = match losses.post {
        Some(p) if want_post_grads => {
            let mut g = fr.tape.backward_multi(&[losses.event, p])?;
            let gp = g.pop();
            (g.pop().expect("two roots"), gp)
        }
        _ => (fr.tape.backward(losses.event)?, None),
    };
    Ok(UnitStep {
        loss_event,
        loss_post,
        grads_event,
        grads_post,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn snapshot<T: Scalar>(
    cfg: &TrainConfig,
    model: &ModelConfig,
    params: &ParamStore<T>,
    vocab: &Vocabulary,
    state: &AdamState<T>,
    epoch: usize,
) -> Checkpoint<T> {
    Checkpoint {
        config: model.clone(),
        params: params.clone(),
        vocab: vocab.clone(),
        optimizer: Some(state.clone()),
        schedule: cfg.schedule,
        epoch,
    }
}

/// Trains on `train`, early-stopping on `valid`.
pub fn train<T: Scalar>(train: &[Event], valid: &[Event], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with(train, valid, cfg, |_| {})
}

/// [`train`] with a callback after every completed epoch.
pub fn train_with<T: Scalar>(
    train: &[Event],
    valid: &[Event],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocab = build_vocab(train, cfg.max_vocab);
    let mut model = cfg.model.clone();
    model.vocab_size = vocab.len();
    model.validate()?;
    let mode = model.mode;

    let train_units = prepare_units(train, &vocab, &model);
    let valid_units = prepare_units(valid, &vocab, &model);
    let mut params: ParamStore<T> = init_params(&model, cfg.seed)?;
    let mut state = AdamState::new(&params, cfg.adam);

    let initial_loss = mean(score_units(&params, &model, &train_units)?.iter().map(|s| s.loss_event));
    let mut best = snapshot(cfg, &model, &params, &vocab, &state, 0);
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = None;
    let mut logs = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let beta = effective_beta(mode, &cfg.schedule, epoch);
        let want_post = beta != 0.0;
        let mut sum_event = 0.0;
        let mut sum_post = 0.0;

        for batch in make_batches(&train_units, cfg.batch_size, cfg.seed, epoch) {
            let steps: Vec<UnitStep<T>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = unit_rng(cfg.seed, epoch, i);
                    unit_step(&params, &model, &train_units[i], &mut rng, want_post)
                })
                .collect::<Result<_>>()?;
            let finite = steps.iter().all(|s| {
                s.loss_event.is_finite()
                    && s.loss_post.map_or(true, f64::is_finite)
                    && s.grads_event.first_non_finite().is_none()
                    && s.grads_post.as_ref().map_or(true, |g| g.first_non_finite().is_none())
            });
            if !finite {
                stop = StopReason::Diverged { epoch };
                break 'epochs;
            }
            sum_event += steps.iter().map(|s| s.loss_event).sum::<f64>();
            sum_post += steps.iter().filter_map(|s| s.loss_post).sum::<f64>();

            let ge: Vec<Gradients<T>> = steps.iter().map(|s| s.grads_event.clone()).collect();
            let ge = Gradients::mean_of(&ge, &params);
            let gp = if want_post {
                let parts: Vec<Gradients<T>> = steps.iter().filter_map(|s| s.grads_post.clone()).collect();
                Some(Gradients::mean_of(&parts, &params))
            } else {
                None
            };
            apply_multiloss_step(&mut params, &ge, gp.as_ref(), &mut state, epoch, mode, &cfg.schedule)?;
        }

        let scored = score_units(&params, &model, &valid_units)?;
        let val_loss = mean(scored.iter().map(|s| s.loss_event));
        if !val_loss.is_finite() {
            stop = StopReason::Diverged { epoch };
            break;
        }
        let n = train_units.len() as f64;
        let log = EpochLog {
            epoch,
            loss_event: sum_event / n,
            loss_post: (mode != Mode::Flat).then(|| sum_post / n),
            beta,
            val_loss,
            val: metrics_of(&scored),
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "{mode} epoch {epoch}: loss_event {:.4} val_loss {:.4} val_acc {:.3}",
            log.loss_event,
            log.val_loss,
            log.val.accuracy
        );
        on_epoch(&log);
        let val_acc = log.val.accuracy;
        logs.push(log);

        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = Some(epoch);
            best = snapshot(cfg, &model, &params, &vocab, &state, epoch + 1);
        }
        if cfg.target_val_accuracy.is_some_and(|t| val_acc >= t) {
            best = snapshot(cfg, &model, &params, &vocab, &state, epoch + 1);
            stop = StopReason::TargetReached { epoch };
            break;
        }
        if let Some(b) = best_epoch {
            if epoch - b >= cfg.patience {
                stop = StopReason::EarlyStop { best_epoch: b };
                break;
            }
        }
    }

    Ok(TrainOutcome {
        checkpoint: best,
        logs,
        initial_loss,
        stop,
    })
}
