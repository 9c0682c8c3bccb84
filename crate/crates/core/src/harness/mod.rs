//! Training, evaluation, ablation and early-detection runners, plus the
//! synthetic corpus.

mod ablate;
mod early;
mod evaluate;
mod gradcheck;
mod metrics;
mod report;
mod synth;
mod train;

pub use ablate::{ablate, AblationReport, AblationRun, TrendCheck, LOSS_COMPARE_EPOCH};
pub use early::{early_eval, write_slices_csv, SliceResult};
pub use evaluate::{check_consistency, evaluate, metrics_of, prepare_units, score_events, score_units, Scored};
pub use gradcheck::ModelGradCheck;
pub use metrics::Metrics;
pub use report::{write_epoch_log_csv, write_metrics_csv, EPOCH_LOG_HEADER, METRICS_HEADER};
pub use synth::{make_synthetic, marker_oracle, MARKER_TOKEN, MAX_POSTS, MIN_POSTS, MIN_SYNTH_EVENTS};
pub use train::{build_vocab, make_batches, train, train_with, EpochLog, StopReason, TrainConfig, TrainOutcome};
