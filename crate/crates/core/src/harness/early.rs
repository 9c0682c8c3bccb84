use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::harness::evaluate::{check_consistency, metrics_of, prepare_units, score_units};
use crate::harness::Metrics;
use crate::model::Checkpoint;
use crate::pheme::{early_slices, Event, SliceSpec};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceResult {
    pub slice: String,
    pub posts: String,
    /// Scored units in the slice; per post for `POST_ONLY`.
    pub n: usize,
    /// `None` for an empty slice.
    pub accuracy: Option<f64>,
    #[serde(skip)]
    pub metrics: Option<Metrics>,
}

impl SliceResult {
    fn new(spec: &SliceSpec, metrics: Option<Metrics>) -> Self {
        Self {
            slice: spec.name.to_string(),
            posts: spec.range_label(),
            n: metrics.map_or(0, |m| m.n),
            accuracy: metrics.map(|m| m.accuracy),
            metrics,
        }
    }
}

/// Accuracy per early-detection slice, each event cut to its slice ceiling.
pub fn early_eval<T: Scalar>(ckpt: &Checkpoint<T>, test_events: &[Event]) -> Result<Vec<SliceResult>> {
    check_consistency(ckpt)?;
    early_slices(test_events)
        .into_iter()
        .map(|(spec, events)| {
            if events.is_empty() {
                return Ok(SliceResult::new(&spec, None));
            }
            let units = prepare_units(&events, &ckpt.vocab, &ckpt.config);
            let scored = score_units(&ckpt.params, &ckpt.config, &units)?;
            Ok(SliceResult::new(&spec, Some(metrics_of(&scored))))
        })
        .collect()
}

/// CSV with columns `slice,posts,n,accuracy`; an empty slice leaves
/// `accuracy` blank.
pub fn write_slices_csv<W: Write>(results: &[SliceResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["slice", "posts", "n", "accuracy"])?;
    for r in results {
        out.write_record([
            r.slice.clone(),
            r.posts.clone(),
            r.n.to_string(),
            r.accuracy.map(|a| format!("{a:.6}")).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
