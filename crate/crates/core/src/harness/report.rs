//! CSV writers for epoch logs and metrics.

use std::io::Write;

use crate::error::Result;
use crate::harness::{EpochLog, Metrics};

pub const EPOCH_LOG_HEADER: [&str; 9] = [
    "epoch", "loss_event", "loss_post", "beta", "val_acc", "val_prec", "val_rec", "val_f1", "seconds",
];

pub const METRICS_HEADER: [&str; 9] = ["accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn", "n"];

fn f(v: f64) -> String {
    format!("{v:.6}")
}

pub(crate) fn epoch_fields(log: &EpochLog) -> Vec<String> {
    vec![
        log.epoch.to_string(),
        f(log.loss_event),
        log.loss_post.map(f).unwrap_or_default(),
        f(log.beta),
        f(log.val.accuracy),
        f(log.val.precision),
        f(log.val.recall),
        f(log.val.f1),
        format!("{:.3}", log.seconds),
    ]
}

pub(crate) fn metric_fields(m: &Metrics) -> Vec<String> {
    vec![
        f(m.accuracy),
        f(m.precision),
        f(m.recall),
        f(m.f1),
        m.tp.to_string(),
        m.fp.to_string(),
        m.tn.to_string(),
        m.fn_.to_string(),
        m.n.to_string(),
    ]
}

pub fn write_epoch_log_csv<W: Write>(logs: &[EpochLog], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EPOCH_LOG_HEADER)?;
    for log in logs {
        out.write_record(epoch_fields(log))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_metrics_csv<W: Write>(m: &Metrics, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    out.write_record(metric_fields(m))?;
    out.flush()?;
    Ok(())
}
