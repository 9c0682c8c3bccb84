//! Seeded synthetic threads standing in for PHEME at desk scale.
//!
//! Posts are filler words `w000`..`w099`. A rumor event carries
//! [`MARKER_TOKEN`] in its first reply with probability `marker_rate`, and
//! its replies sprinkle in skeptical cue words `c00`..`c09`. Nonrumor events
//! contain neither, so with `marker_rate = 1` the marker alone separates the
//! classes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pheme::{Dataset, Event, Label, Post};
use crate::text::normalize;

pub const MARKER_TOKEN: &str = "zzmarker";
pub const MIN_SYNTH_EVENTS: usize = 20;
pub const MIN_POSTS: usize = 2;
pub const MAX_POSTS: usize = 30;
const FILLER_WORDS: usize = 100;
const CUE_WORDS: usize = 10;
/// Chance that a rumor reply word is drawn from the cue pool.
const CUE_RATE: f64 = 0.15;
const BASE_TIME: i64 = 1_420_070_400;

fn words<R: Rng>(rng: &mut R, cue_rate: f64) -> Vec<String> {
    let n = rng.gen_range(3..=8);
    (0..n)
        .map(|_| {
            if cue_rate > 0.0 && rng.gen_bool(cue_rate) {
                format!("c{:02}", rng.gen_range(0..CUE_WORDS))
            } else {
                format!("w{:03}", rng.gen_range(0..FILLER_WORDS))
            }
        })
        .collect()
}

/// `n_events` balanced events (`⌈n/2⌉` rumors) of 2–30 posts.
pub fn make_synthetic(n_events: usize, marker_rate: f64, seed: u64) -> Result<Dataset> {
    if n_events < MIN_SYNTH_EVENTS {
        return Err(Error::TooFewEvents {
            needed: MIN_SYNTH_EVENTS,
            got: n_events,
        });
    }
    if !(0.0..=1.0).contains(&marker_rate) {
        return Err(Error::Config(format!("marker_rate {marker_rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Label> = (0..n_events)
        .map(|i| if i < n_events.div_ceil(2) { Label::Rumor } else { Label::Nonrumor })
        .collect();
    labels.shuffle(&mut rng);

    let events = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let rumor = label == Label::Rumor;
            let n_posts = rng.gen_range(MIN_POSTS..=MAX_POSTS);
            let plant = rumor && rng.gen_bool(marker_rate);
            let mut time = BASE_TIME + 3600 * i as i64;
            let posts = (0..n_posts)
                .map(|j| {
                    let cue = if rumor && j > 0 { CUE_RATE } else { 0.0 };
                    let mut text = words(&mut rng, cue);
                    if j == 1 && plant {
                        let at = rng.gen_range(0..=text.len());
                        text.insert(at, MARKER_TOKEN.to_string());
                    }
                    time += rng.gen_range(1..600);
                    Post {
                        id: format!("{}", (i + 1) * 1000 + j),
                        text: text.join(" "),
                        time,
                        is_source: j == 0,
                    }
                })
                .collect();
            Event {
                id: format!("synth-{i:05}"),
                topic: "synthetic".into(),
                label,
                posts,
            }
        })
        .collect();
    Ok(Dataset::new(events))
}

/// Bag-of-words oracle: rumor exactly when some post contains the marker.
pub fn marker_oracle(event: &Event) -> Label {
    let planted = event
        .posts
        .iter()
        .any(|p| normalize(&p.text).iter().any(|t| t == MARKER_TOKEN));
    if planted {
        Label::Rumor
    } else {
        Label::Nonrumor
    }
}
