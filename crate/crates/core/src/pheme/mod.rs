//! Thread data: the event/post model, PHEME directory ingestion, the
//! canonical JSONL format, splits, early-detection slices and statistics.

mod canonical;
mod parse;
mod slices;
mod split;
mod stats;
mod types;

pub use canonical::{load_canonical, read_canonical, save_canonical, write_canonical, MAX_LINE_BYTES};
pub use parse::{parse_pheme_dir, ParseReport, Reject};
pub use slices::{early_slices, slice_for, SliceSpec, EARLY_SLICES};
pub use split::{split, MIN_SPLIT_EVENTS};
pub use stats::{stats, DatasetStats, PHEME_2017_BALANCE, PHEME_2017_EVENTS};
pub use types::{Dataset, Event, Label, Post, SplitTag, Splits};
